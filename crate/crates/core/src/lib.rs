pub mod agent;
pub mod cli;
pub mod clock;
pub mod context;
pub mod dfd;
pub mod engine;
pub mod hash;
pub mod llm;
pub mod protocol;
pub mod service;
pub mod store;

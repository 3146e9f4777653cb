fn main() -> std::process::ExitCode {
    structind::cli::main()
}

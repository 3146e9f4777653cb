//! Runs an operator-supplied command against a candidate program.
//!
//! The command runs unsandboxed through `sh -c`, in its own process group so
//! a timeout can kill everything it spawned. `{file}` in the command is
//! replaced by the path of the materialized program, `{dir}` by its
//! directory.

use std::io::Read;
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use crate::protocol::ProgramText;

const OUTPUT_LIMIT: usize = 4000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckerHook {
    pub command: String,
    pub timeout: Duration,
    pub file_name: String,
    pub workdir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CheckOutcome {
    Pass,
    /// Captured diagnostics, stdout then stderr.
    Fail(String),
    TimedOut,
}

fn quote(path: &Path) -> String {
    format!("'{}'", path.display().to_string().replace('\'', r"'\''"))
}

/// Keep the tail, where tracebacks put the actual error.
fn tail(text: &str) -> String {
    let text = text.trim();
    if text.len() <= OUTPUT_LIMIT {
        return text.to_string();
    }
    let mut start = text.len() - OUTPUT_LIMIT;
    while !text.is_char_boundary(start) {
        start += 1;
    }
    format!("...{}", &text[start..])
}

fn drain(stream: Option<impl Read + Send + 'static>) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut s) = stream {
            let _ = s.read_to_end(&mut buf);
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

fn kill_group(child: &mut Child) {
    // The child leads its own group, so its pid is the group id.
    let pgid = child.id() as libc::pid_t;
    unsafe {
        libc::kill(-pgid, libc::SIGKILL);
    }
    let _ = child.kill();
    let _ = child.wait();
}

impl CheckerHook {
    pub fn new(command: impl Into<String>, timeout: Duration) -> Self {
        Self {
            command: command.into(),
            timeout,
            file_name: "candidate.py".into(),
            workdir: None,
        }
    }

    pub fn run(&self, program: &ProgramText) -> CheckOutcome {
        let Some(source) = program.as_str() else {
            return CheckOutcome::Fail("no program to check".into());
        };
        if self.timeout.is_zero() {
            return CheckOutcome::Fail("checker timeout must be positive".into());
        }
        let dir = match &self.workdir {
            Some(d) => d.clone(),
            None => std::env::temp_dir().join(format!("structind-check-{}", uuid::Uuid::new_v4())),
        };
        if let Err(e) = std::fs::create_dir_all(&dir) {
            return CheckOutcome::Fail(format!("cannot create {}: {e}", dir.display()));
        }
        let file = dir.join(&self.file_name);
        if let Err(e) = std::fs::write(&file, source) {
            return CheckOutcome::Fail(format!("cannot write {}: {e}", file.display()));
        }
        let command = self
            .command
            .replace("{file}", &quote(&file))
            .replace("{dir}", &quote(&dir));
        let outcome = self.execute(&command, &dir);
        if self.workdir.is_none() {
            let _ = std::fs::remove_dir_all(&dir);
        }
        outcome
    }

    fn execute(&self, command: &str, dir: &Path) -> CheckOutcome {
        let spawned = Command::new("sh")
            .arg("-c")
            .arg(command)
            .current_dir(dir)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .process_group(0)
            .spawn();
        let mut child = match spawned {
            Ok(c) => c,
            Err(e) => return CheckOutcome::Fail(format!("cannot start checker: {e}")),
        };
        let out = drain(child.stdout.take());
        let err = drain(child.stderr.take());
        let deadline = Instant::now() + self.timeout;
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break Some(status),
                Ok(None) if Instant::now() >= deadline => break None,
                Ok(None) => thread::sleep(Duration::from_millis(10)),
                Err(e) => return CheckOutcome::Fail(format!("checker wait failed: {e}")),
            }
        };
        let Some(status) = status else {
            kill_group(&mut child);
            return CheckOutcome::TimedOut;
        };
        // Grandchildren may still hold the pipes open; do not wait on them.
        unsafe {
            libc::kill(-(child.id() as libc::pid_t), libc::SIGKILL);
        }
        if status.success() {
            return CheckOutcome::Pass;
        }
        let text = format!("{}\n{}", out.join().unwrap_or_default(), err.join().unwrap_or_default());
        let text = tail(&text);
        if text.is_empty() {
            CheckOutcome::Fail(format!("checker failed with {status}"))
        } else {
            CheckOutcome::Fail(text)
        }
    }
}

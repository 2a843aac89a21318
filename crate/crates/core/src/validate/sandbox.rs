//! Disposable project copies and time-limited shell commands.

use std::fs::{self, File};
use std::io;
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tempfile::TempDir;

const OUTPUT_TAIL_BYTES: usize = 64 * 1024;
const POLL_INTERVAL: Duration = Duration::from_millis(5);

/// A private copy of a project directory.
#[derive(Debug)]
pub struct Workspace {
    scratch: TempDir,
    root: PathBuf,
    origin: PathBuf,
}

impl Workspace {
    pub fn create(origin: &Path) -> io::Result<Self> {
        let scratch = tempfile::Builder::new().prefix("apr-ws-").tempdir()?;
        let root = scratch.path().join("project");
        copy_tree(origin, &root)?;
        Ok(Workspace {
            scratch,
            root,
            origin: origin.to_path_buf(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Throws the copy away and copies the origin again.
    pub fn reset(&mut self) -> io::Result<()> {
        if self.root.exists() {
            fs::remove_dir_all(&self.root)?;
        }
        copy_tree(&self.origin, &self.root)
    }

    fn capture_path(&self) -> PathBuf {
        self.scratch.path().join("output.log")
    }

    /// Runs `command` through `sh -c` inside the copy.
    pub fn run(&self, command: &str, timeout: Duration) -> io::Result<CommandRun> {
        run_command(command, &self.root, timeout, &self.capture_path())
    }
}

pub fn copy_tree(from: &Path, to: &Path) -> io::Result<()> {
    fs::create_dir_all(to)?;
    let mut entries: Vec<_> = fs::read_dir(from)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let kind = entry.file_type()?;
        let target = to.join(entry.file_name());
        if kind.is_dir() {
            copy_tree(&entry.path(), &target)?;
        } else if kind.is_symlink() {
            std::os::unix::fs::symlink(fs::read_link(entry.path())?, &target)?;
        } else {
            fs::copy(entry.path(), &target)?;
        }
    }
    Ok(())
}

/// One workspace per worker; `map` hands items out in order and returns
/// results in input order.
pub struct WorkspacePool {
    origin: PathBuf,
    size: usize,
}

impl WorkspacePool {
    pub fn new(origin: &Path, size: usize) -> Self {
        WorkspacePool {
            origin: origin.to_path_buf(),
            size: size.max(1),
        }
    }

    pub fn map<T, R, E>(
        &self,
        items: &[T],
        f: impl Fn(&mut Workspace, &T) -> Result<R, E> + Sync,
    ) -> Result<Vec<R>, E>
    where
        T: Sync,
        R: Send,
        E: Send + From<io::Error>,
    {
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<R, E>>>> =
            Mutex::new((0..items.len()).map(|_| None).collect());
        let workers = self.size.min(items.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| {
                    let mut ws = match Workspace::create(&self.origin) {
                        Ok(ws) => ws,
                        Err(e) => {
                            let i = next.fetch_add(1, Ordering::SeqCst);
                            if i < items.len() {
                                slots.lock().expect("poisoned")[i] = Some(Err(e.into()));
                            }
                            return;
                        }
                    };
                    loop {
                        let i = next.fetch_add(1, Ordering::SeqCst);
                        if i >= items.len() {
                            break;
                        }
                        let r = f(&mut ws, &items[i]);
                        slots.lock().expect("poisoned")[i] = Some(r);
                    }
                });
            }
        });
        let slots = slots.into_inner().expect("poisoned");
        let mut out = Vec::with_capacity(items.len());
        for slot in slots {
            match slot {
                Some(r) => out.push(r?),
                None => {
                    return Err(io::Error::other("workspace worker stopped early").into());
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum ExitKind {
    Code(i32),
    Signal(i32),
    TimedOut,
}

impl ExitKind {
    pub fn success(self) -> bool {
        self == ExitKind::Code(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRun {
    pub command: String,
    pub exit: ExitKind,
    /// Combined stdout and stderr, keeping only the last 64 KiB.
    pub output: String,
    pub wall_seconds: f64,
}

/// Runs `sh -c command` in its own process group, killing the whole group
/// on timeout and after exit.
pub fn run_command(
    command: &str,
    cwd: &Path,
    timeout: Duration,
    capture: &Path,
) -> io::Result<CommandRun> {
    let out = File::create(capture)?;
    let err = out.try_clone()?;
    let start = Instant::now();
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .current_dir(cwd)
        .env("PYTHONDONTWRITEBYTECODE", "1")
        .stdin(Stdio::null())
        .stdout(out)
        .stderr(err)
        .process_group(0)
        .spawn()?;
    let group = child.id() as libc::pid_t;
    let exit = loop {
        if let Some(status) = child.try_wait()? {
            break match (status.code(), status.signal()) {
                (Some(c), _) => ExitKind::Code(c),
                (None, Some(s)) => ExitKind::Signal(s),
                (None, None) => ExitKind::Code(-1),
            };
        }
        if start.elapsed() >= timeout {
            kill_group(group);
            child.wait()?;
            break ExitKind::TimedOut;
        }
        std::thread::sleep(POLL_INTERVAL);
    };
    kill_group(group);
    let wall_seconds = start.elapsed().as_secs_f64();
    let bytes = fs::read(capture)?;
    let tail = &bytes[bytes.len().saturating_sub(OUTPUT_TAIL_BYTES)..];
    Ok(CommandRun {
        command: command.to_string(),
        exit,
        output: String::from_utf8_lossy(tail).into_owned(),
        wall_seconds,
    })
}

fn kill_group(group: libc::pid_t) {
    // SAFETY: kill(2) with a negative pid only signals that process group.
    unsafe {
        libc::kill(-group, libc::SIGKILL);
    }
}

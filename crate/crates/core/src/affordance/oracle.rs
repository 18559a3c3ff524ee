use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::descriptor::AffordanceDescriptor;
use super::parse::{parse_affordance_response, parse_json_response};
use super::AffordanceError;

/// Selects the oracle kind: `mock` or `subprocess`.
pub const ORACLE_ENV: &str = "SPOTLIGHT_ORACLE";
/// Shell command line for the subprocess oracle.
pub const ORACLE_CMD_ENV: &str = "SPOTLIGHT_ORACLE_CMD";
/// Path to the JSON id → descriptor map for the mock oracle.
pub const ORACLE_MAP_ENV: &str = "SPOTLIGHT_ORACLE_MAP";

/// Identifies the element an oracle is asked about.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementRef {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<String>,
}

impl ElementRef {
    pub fn new(id: impl Into<String>) -> Self {
        Self { id: id.into(), image_path: None }
    }

    pub fn with_image(id: impl Into<String>, image_path: impl Into<String>) -> Self {
        Self { id: id.into(), image_path: Some(image_path.into()) }
    }
}

/// Request line written to a subprocess oracle.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleRequest<'a> {
    pub id: &'a str,
    pub image_path: Option<&'a str>,
}

pub trait AffordanceOracle {
    fn query(&mut self, element: &ElementRef) -> Result<AffordanceDescriptor, AffordanceError>;
}

impl<T: AffordanceOracle + ?Sized> AffordanceOracle for Box<T> {
    fn query(&mut self, element: &ElementRef) -> Result<AffordanceDescriptor, AffordanceError> {
        (**self).query(element)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MockEntry {
    Text(String),
    Descriptor(AffordanceDescriptor),
}

/// Table-driven oracle keyed by element id.
#[derive(Clone, Debug, Default)]
pub struct MockOracle {
    table: BTreeMap<String, AffordanceDescriptor>,
}

impl MockOracle {
    pub fn new(table: BTreeMap<String, AffordanceDescriptor>) -> Self {
        Self { table }
    }

    /// Parse a JSON object whose values are either free response text or
    /// descriptor objects.
    pub fn from_json(text: &str) -> Result<Self, AffordanceError> {
        let raw: BTreeMap<String, MockEntry> = serde_json::from_str(text)
            .map_err(|e| AffordanceError::MalformedResponse(format!("mock table: {e}")))?;
        let mut table = BTreeMap::new();
        for (id, entry) in raw {
            let d = match entry {
                MockEntry::Text(t) => parse_affordance_response(&t)?,
                MockEntry::Descriptor(d) => d,
            };
            table.insert(id, d);
        }
        Ok(Self { table })
    }

    pub fn insert(&mut self, id: impl Into<String>, desc: AffordanceDescriptor) {
        self.table.insert(id.into(), desc);
    }
}

impl AffordanceOracle for MockOracle {
    fn query(&mut self, element: &ElementRef) -> Result<AffordanceDescriptor, AffordanceError> {
        self.table
            .get(&element.id)
            .copied()
            .ok_or_else(|| AffordanceError::OracleUnavailable(format!("no entry for {:?}", element.id)))
    }
}

/// External process speaking line-delimited JSON on stdin/stdout.
///
/// One request is in flight at a time. Each query makes up to
/// `max_attempts` request/response round trips before giving up with
/// `MalformedResponse`.
pub struct SubprocessOracle {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    max_attempts: usize,
    timeout: Duration,
}

impl SubprocessOracle {
    pub const DEFAULT_ATTEMPTS: usize = 2;
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

    pub fn spawn(program: &str, args: &[&str]) -> Result<Self, AffordanceError> {
        let mut cmd = Command::new(program);
        cmd.args(args);
        Self::from_command(cmd)
    }

    /// Run `command_line` through `sh -c`.
    pub fn spawn_shell(command_line: &str) -> Result<Self, AffordanceError> {
        Self::spawn("sh", &["-c", command_line])
    }

    pub fn from_command(mut cmd: Command) -> Result<Self, AffordanceError> {
        let mut child = cmd
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| AffordanceError::OracleUnavailable(format!("spawn failed: {e}")))?;
        let stdin = child.stdin.take();
        let stdout = child
            .stdout
            .take()
            .ok_or_else(|| AffordanceError::OracleUnavailable("no stdout pipe".into()))?;
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            child,
            stdin,
            lines: rx,
            max_attempts: Self::DEFAULT_ATTEMPTS,
            timeout: Self::DEFAULT_TIMEOUT,
        })
    }

    pub fn with_attempts(mut self, attempts: usize) -> Self {
        self.max_attempts = attempts.max(1);
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn round_trip(&mut self, request: &str) -> Result<String, AffordanceError> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| AffordanceError::OracleUnavailable("stdin closed".into()))?;
        writeln!(stdin, "{request}")
            .and_then(|_| stdin.flush())
            .map_err(|e| AffordanceError::OracleUnavailable(format!("write failed: {e}")))?;
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(AffordanceError::OracleUnavailable(format!("read failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                Err(AffordanceError::OracleUnavailable("response timed out".into()))
            }
            Err(RecvTimeoutError::Disconnected) => {
                Err(AffordanceError::OracleUnavailable("oracle process exited".into()))
            }
        }
    }
}

impl AffordanceOracle for SubprocessOracle {
    fn query(&mut self, element: &ElementRef) -> Result<AffordanceDescriptor, AffordanceError> {
        let request = serde_json::to_string(&OracleRequest {
            id: &element.id,
            image_path: element.image_path.as_deref(),
        })
        .map_err(|e| AffordanceError::OracleUnavailable(e.to_string()))?;
        let mut last = AffordanceError::MalformedResponse("no attempts made".into());
        for _ in 0..self.max_attempts {
            let line = self.round_trip(&request)?;
            // A JSON object, or the free-text answer itself.
            let parsed = if line.trim_start().starts_with('{') {
                parse_json_response(&line)
            } else {
                parse_affordance_response(&line)
            };
            match parsed {
                Ok(d) => return Ok(d),
                Err(e) => last = e,
            }
        }
        Err(last)
    }
}

impl Drop for SubprocessOracle {
    fn drop(&mut self) {
        drop(self.stdin.take());
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Build the oracle selected by the environment, or `None` when
/// `SPOTLIGHT_ORACLE` is unset.
pub fn oracle_from_env() -> Result<Option<Box<dyn AffordanceOracle + Send>>, AffordanceError> {
    let kind = match std::env::var(ORACLE_ENV) {
        Ok(k) if !k.trim().is_empty() => k.trim().to_lowercase(),
        _ => return Ok(None),
    };
    match kind.as_str() {
        "mock" => {
            let path = std::env::var(ORACLE_MAP_ENV).map_err(|_| {
                AffordanceError::OracleUnavailable(format!("{ORACLE_MAP_ENV} is not set"))
            })?;
            let text = std::fs::read_to_string(&path)
                .map_err(|e| AffordanceError::OracleUnavailable(format!("{path}: {e}")))?;
            Ok(Some(Box::new(MockOracle::from_json(&text)?)))
        }
        "subprocess" => {
            let cmd = std::env::var(ORACLE_CMD_ENV).map_err(|_| {
                AffordanceError::OracleUnavailable(format!("{ORACLE_CMD_ENV} is not set"))
            })?;
            Ok(Some(Box::new(SubprocessOracle::spawn_shell(&cmd)?)))
        }
        other => Err(AffordanceError::OracleUnavailable(format!("unknown oracle kind {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affordance::{Arrangement, SwitchType};

    #[test]
    fn mock_passthrough() {
        let mut o = MockOracle::from_json(r#"{"3": "turn button, single"}"#).unwrap();
        assert_eq!(o.query(&ElementRef::new("3")).unwrap(), AffordanceDescriptor::single(SwitchType::TurnButton));
        assert!(matches!(o.query(&ElementRef::new("4")), Err(AffordanceError::OracleUnavailable(_))));
    }

    #[test]
    fn subprocess_round_trip() {
        let mut o = SubprocessOracle::spawn_shell(
            r#"while read -r line; do echo '{"type":"push button","count":2,"arrangement":"side-by-side"}'; done"#,
        )
        .unwrap();
        let d = o.query(&ElementRef::with_image("7", "img.png")).unwrap();
        assert_eq!(d.switch_type(), SwitchType::PushButton);
        assert_eq!(d.button_count(), 2);
        assert_eq!(d.arrangement(), Arrangement::SideBySide);
    }

    #[test]
    fn subprocess_garbage_twice() {
        let mut o = SubprocessOracle::spawn_shell("while read -r line; do echo 'sorry, no idea'; done").unwrap();
        assert!(matches!(o.query(&ElementRef::new("1")), Err(AffordanceError::MalformedResponse(_))));
    }

    #[test]
    fn subprocess_recovers_on_retry() {
        let script = r#"n=0; while read -r line; do n=$((n+1)); if [ $n -eq 1 ]; then echo junk; else echo '{"type":"rocker"}'; fi; done"#;
        let mut o = SubprocessOracle::spawn_shell(script).unwrap();
        assert_eq!(o.query(&ElementRef::new("1")).unwrap(), AffordanceDescriptor::single(SwitchType::Rocker));
    }

    #[test]
    fn subprocess_exit_is_unavailable() {
        let mut o = SubprocessOracle::spawn_shell("exit 0").unwrap();
        assert!(matches!(o.query(&ElementRef::new("1")), Err(AffordanceError::OracleUnavailable(_))));
    }
}

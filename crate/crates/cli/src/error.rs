use std::fmt;
use std::path::Path;

/// Failure classes, each with its own exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Internal,
    Usage,
    File,
    Input,
    Unreachable,
    Rejected,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Internal => 1,
            Kind::Usage => 2,
            Kind::File => 3,
            Kind::Input => 4,
            Kind::Unreachable => 5,
            Kind::Rejected => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::Internal => "internal",
            Kind::Usage => "usage",
            Kind::File => "file",
            Kind::Input => "input",
            Kind::Unreachable => "unreachable",
            Kind::Rejected => "rejected",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub msg: String,
}

impl CliError {
    pub fn new(kind: Kind, msg: impl Into<String>) -> Self {
        Self { kind, msg: msg.into() }
    }

    pub fn input(msg: impl fmt::Display) -> Self {
        Self::new(Kind::Input, msg.to_string())
    }

    pub fn internal(msg: impl fmt::Display) -> Self {
        Self::new(Kind::Internal, msg.to_string())
    }

    /// One line on stderr: `ctxauth: error kind=<kind> exit=<code> msg=<json string>`.
    pub fn line(&self) -> String {
        format!(
            "ctxauth: error kind={} exit={} msg={}",
            self.kind.name(),
            self.kind.exit_code(),
            serde_json::Value::String(self.msg.clone())
        )
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::new(Kind::File, format!("cannot read {}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::new(Kind::File, format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::new(Kind::File, format!("cannot write {}: {e}", path.display())))
}

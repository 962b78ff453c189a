use std::io;
use std::path::{Path, PathBuf};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// Malformed input; `location` is a line, byte offset or document path.
    #[error("{}:{location}: {message}", path.display())]
    Parse {
        path: PathBuf,
        location: String,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Data {
        path: PathBuf,
        #[source]
        source: cppcn_core::Error,
    },

    #[error(transparent)]
    Core(#[from] cppcn_core::Error),

    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Check(String),
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn parse(path: impl AsRef<Path>, location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.as_ref().to_path_buf(),
            location: location.into(),
            message: message.into(),
        }
    }

    pub fn data(path: impl AsRef<Path>, source: cppcn_core::Error) -> Self {
        Error::Data {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    /// Process exit status: 1 for usage errors, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            _ => 2,
        }
    }
}

pub(crate) trait ResultExt<T> {
    fn at(self, path: impl AsRef<Path>) -> Result<T>;
}

impl<T> ResultExt<T> for std::result::Result<T, io::Error> {
    fn at(self, path: impl AsRef<Path>) -> Result<T> {
        self.map_err(|e| Error::io(path, e))
    }
}

impl<T> ResultExt<T> for std::result::Result<T, cppcn_core::Error> {
    fn at(self, path: impl AsRef<Path>) -> Result<T> {
        self.map_err(|e| Error::data(path, e))
    }
}

use std::fmt;

/// Why a participant stopped taking part in a draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AbortCause {
    BadSignature,
    BadDrawNo,
    BadHash,
    MissingPeer,
    DecodeError,
    Timeout,
}

impl AbortCause {
    pub const ALL: [AbortCause; 6] = [
        AbortCause::BadSignature,
        AbortCause::BadDrawNo,
        AbortCause::BadHash,
        AbortCause::MissingPeer,
        AbortCause::DecodeError,
        AbortCause::Timeout,
    ];

    pub fn code(self) -> u8 {
        match self {
            AbortCause::BadSignature => 1,
            AbortCause::BadDrawNo => 2,
            AbortCause::BadHash => 3,
            AbortCause::MissingPeer => 4,
            AbortCause::DecodeError => 5,
            AbortCause::Timeout => 6,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            AbortCause::BadSignature => "bad-signature",
            AbortCause::BadDrawNo => "bad-draw-no",
            AbortCause::BadHash => "bad-hash",
            AbortCause::MissingPeer => "missing-peer",
            AbortCause::DecodeError => "decode-error",
            AbortCause::Timeout => "timeout",
        }
    }
}

impl fmt::Display for AbortCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Whether an aborting party announces its abort with a signed notice.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AbortMode {
    #[default]
    SignedError,
    Silent,
}

/// Terminal state of a participant that did not reach a result.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Abort {
    /// Protocol step (1..=15) at which the problem was detected.
    pub phase: u8,
    pub cause: AbortCause,
    pub culprit: Option<String>,
    pub mode: AbortMode,
    /// Set when this abort was adopted from a peer's signed notice.
    pub reported_by: Option<String>,
}

impl Abort {
    pub fn new(phase: u8, cause: AbortCause, culprit: Option<String>) -> Self {
        Self {
            phase,
            cause,
            culprit,
            mode: AbortMode::SignedError,
            reported_by: None,
        }
    }

    /// From step 11 on every party is committed; aborts there are evidence for
    /// offline arbitration rather than plain sabotage.
    pub fn after_commitment(&self) -> bool {
        self.phase > 11
    }
}

impl fmt::Display for Abort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "abort at step {}: {}", self.phase, self.cause)?;
        if let Some(c) = &self.culprit {
            write!(f, " (culprit {c})")?;
        }
        if let Some(r) = &self.reported_by {
            write!(f, " [reported by {r}]")?;
        }
        Ok(())
    }
}

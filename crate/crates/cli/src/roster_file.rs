//! Roster files: one participant per line, `role name public-key-file
//! [secret-key-file]`, initiator first. Relative paths resolve against the
//! roster file's directory. Blank lines and `#` comments are ignored.

use std::fs;
use std::path::{Path, PathBuf};

use fairdraw::crypto::{KeyPair, PublicKey};
use fairdraw::protocol::{Member, Role, Roster};

use crate::CliError;

#[derive(Debug)]
pub struct RosterEntry {
    pub name: String,
    pub role: Role,
    pub public_key: PublicKey,
    pub secret_file: Option<PathBuf>,
}

#[derive(Debug)]
pub struct RosterFile {
    pub entries: Vec<RosterEntry>,
}

impl RosterFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read roster {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| CliError::Usage(format!("{}:{}: {msg}", path.display(), i + 1));
            let words: Vec<&str> = line.split_whitespace().collect();
            let (role, name, public, secret) = match words[..] {
                [role, name, public] => (role, name, public, None),
                [role, name, public, secret] => (role, name, public, Some(secret)),
                _ => return Err(bad("expected `role name public-key-file [secret-key-file]`".into())),
            };
            let role = Role::parse(role).ok_or_else(|| bad(format!("unknown role `{role}`")))?;
            let public_path = base.join(public);
            let public_key = PublicKey::read_file(&public_path)
                .map_err(|e| bad(format!("{}: {e}", public_path.display())))?;
            entries.push(RosterEntry {
                name: name.to_owned(),
                role,
                public_key,
                secret_file: secret.map(|s| base.join(s)),
            });
        }
        Ok(Self { entries })
    }

    pub fn roster(&self) -> Result<Roster, CliError> {
        Roster::new(
            self.entries
                .iter()
                .map(|e| Member {
                    name: e.name.clone(),
                    role: e.role,
                    public_key: e.public_key.clone(),
                })
                .collect(),
        )
        .map_err(|e| CliError::Usage(format!("invalid roster: {e}")))
    }

    /// Every participant's key pair; all secret key files must be given and
    /// match the listed public keys.
    pub fn key_pairs(&self) -> Result<Vec<KeyPair>, CliError> {
        self.entries
            .iter()
            .map(|e| {
                let path = e.secret_file.as_ref().ok_or_else(|| {
                    CliError::Usage(format!("roster gives no secret key file for {}", e.name))
                })?;
                let key = KeyPair::read_file(path)
                    .map_err(|err| CliError::Usage(format!("{}: {err}", path.display())))?;
                if key.public_key() != e.public_key {
                    return Err(CliError::Usage(format!(
                        "{}: secret key does not match the public key of {}",
                        path.display(),
                        e.name
                    )));
                }
                Ok(key)
            })
            .collect()
    }
}

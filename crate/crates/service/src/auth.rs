//! Pre-provisioned login credentials.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::ServiceError;

#[derive(Debug, Clone, Default)]
pub struct Credentials {
    /// username -> SHA-256 of the password
    users: HashMap<String, [u8; 32]>,
}

#[derive(Deserialize)]
struct Row {
    username: String,
    password_sha256: String,
}

impl Credentials {
    /// CSV with columns `username,password_sha256` (lowercase hex).
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, ServiceError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut users = HashMap::new();
        for (idx, row) in rdr.deserialize::<Row>().enumerate() {
            let bad = |m: String| ServiceError::Config(format!("credentials row {}: {m}", idx + 1));
            let row = row.map_err(|e| bad(e.to_string()))?;
            let mut digest = [0u8; 32];
            hex::decode_to_slice(&row.password_sha256, &mut digest)
                .map_err(|e| bad(format!("password_sha256: {e}")))?;
            if row.username.is_empty() {
                return Err(bad("empty username".into()));
            }
            users.insert(row.username, digest);
        }
        Ok(Self { users })
    }

    pub fn from_file(path: &Path) -> Result<Self, ServiceError> {
        let file = std::fs::File::open(path)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        Self::from_reader(file)
    }

    pub fn insert(&mut self, username: impl Into<String>, password: &str) {
        self.users.insert(username.into(), hash_password(password));
    }

    pub fn verify(&self, username: &str, password: &str) -> bool {
        let Some(expected) = self.users.get(username) else {
            return false;
        };
        let given = hash_password(password);
        // fold over every byte so timing does not depend on where they differ
        expected.iter().zip(given.iter()).fold(0u8, |acc, (a, b)| acc | (a ^ b)) == 0
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }
}

pub fn hash_password(password: &str) -> [u8; 32] {
    Sha256::digest(password.as_bytes()).into()
}

pub fn hash_password_hex(password: &str) -> String {
    hex::encode(hash_password(password))
}

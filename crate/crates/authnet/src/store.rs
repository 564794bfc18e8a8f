//! Enrollment records persisted as one JSON document.
//!
//! Saves write a temporary file in the target directory and rename it over
//! the old one, so readers only ever see a complete file.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use qpass_core::trapauth::{KeySet, SALT_LEN};
use qpass_core::verify::AcceptPolicy;
use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrollmentRecord {
    pub user_id: String,
    #[serde(with = "hex_salt")]
    pub salt: [u8; SALT_LEN],
    pub keyset: KeySet,
    pub policy: AcceptPolicy,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
}

impl EnrollmentRecord {
    pub fn new(user_id: String, salt: [u8; SALT_LEN], keyset: KeySet, policy: AcceptPolicy) -> Self {
        let created_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            user_id,
            salt,
            keyset,
            policy,
            created_at,
        }
    }
}

mod hex_salt {
    use super::SALT_LEN;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(salt: &[u8; SALT_LEN], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(salt))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; SALT_LEN], D::Error> {
        let text = String::deserialize(d)?;
        hex::decode(&text)
            .map_err(D::Error::custom)?
            .try_into()
            .map_err(|_| D::Error::custom(format!("salt must be {SALT_LEN} bytes")))
    }
}

#[derive(Serialize, Deserialize)]
struct StoreFile {
    version: u32,
    records: Vec<EnrollmentRecord>,
}

const VERSION: u32 = 1;

#[derive(Debug, Default)]
pub struct EnrollmentStore {
    path: Option<PathBuf>,
    records: BTreeMap<String, EnrollmentRecord>,
}

impl EnrollmentStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens `path`, or starts empty if it does not exist yet.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        if path.exists() {
            Self::load(path)
        } else {
            Ok(Self {
                path: Some(path),
                records: BTreeMap::new(),
            })
        }
    }

    /// Parses the whole file before building any state.
    pub fn load(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let text = std::fs::read_to_string(&path)?;
        let file: StoreFile = serde_json::from_str(&text).map_err(|e| NetError::CorruptStore {
            path: path.clone(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let corrupt = |message: String| NetError::CorruptStore {
            path: path.clone(),
            line: 0,
            column: 0,
            message,
        };
        if file.version != VERSION {
            return Err(corrupt(format!("unsupported store version {}", file.version)));
        }
        let mut records = BTreeMap::new();
        for r in file.records {
            if let Some(dup) = records.insert(r.user_id.clone(), r) {
                return Err(corrupt(format!("user `{}` appears twice", dup.user_id)));
            }
        }
        Ok(Self {
            path: Some(path),
            records,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, user_id: &str) -> Option<&EnrollmentRecord> {
        self.records.get(user_id)
    }

    pub fn records(&self) -> impl Iterator<Item = &EnrollmentRecord> {
        self.records.values()
    }

    pub fn insert(&mut self, record: EnrollmentRecord) -> Result<()> {
        if self.records.contains_key(&record.user_id) {
            return Err(NetError::Duplicate(record.user_id));
        }
        self.records.insert(record.user_id.clone(), record);
        Ok(())
    }

    /// Atomically replaces the backing file; a no-op for in-memory stores.
    pub fn save(&self) -> Result<()> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let file = StoreFile {
            version: VERSION,
            records: self.records.values().cloned().collect(),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        serde_json::to_writer_pretty(&mut tmp, &file)?;
        tmp.write_all(b"\n")?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| NetError::Io(e.error))?;
        Ok(())
    }
}

/// Store shared between sessions; every mutation and save happens under
/// the lock.
#[derive(Debug, Clone, Default)]
pub struct SharedStore(Arc<Mutex<EnrollmentStore>>);

impl SharedStore {
    pub fn new(store: EnrollmentStore) -> Self {
        Self(Arc::new(Mutex::new(store)))
    }

    pub fn lock(&self) -> MutexGuard<'_, EnrollmentStore> {
        // a panicked writer leaves the map consistent: insert is the last step
        self.0.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn get(&self, user_id: &str) -> Option<EnrollmentRecord> {
        self.lock().get(user_id).cloned()
    }

    /// Inserts and persists; on a failed save the insert is rolled back.
    pub fn enroll(&self, record: EnrollmentRecord) -> Result<()> {
        let mut store = self.lock();
        let user = record.user_id.clone();
        store.insert(record)?;
        if let Err(e) = store.save() {
            store.records.remove(&user);
            return Err(e);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qpass_core::trapauth::{derive_keys, Password};

    fn record(user: &str, password: &str, salt: u8) -> EnrollmentRecord {
        let salt = [salt; SALT_LEN];
        let keys = derive_keys(&Password::from_text(password).unwrap(), &salt);
        EnrollmentRecord::new(user.into(), salt, keys, AcceptPolicy::ideal())
    }

    #[test]
    fn save_then_load_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.json");
        let mut store = EnrollmentStore::open(&path).unwrap();
        store.insert(record("alice", "pw1", 1)).unwrap();
        store.insert(record("bob", "pw2", 2)).unwrap();
        store.save().unwrap();
        let loaded = EnrollmentStore::load(&path).unwrap();
        assert_eq!(loaded.records, store.records);
    }

    #[test]
    fn duplicates_are_refused() {
        let mut store = EnrollmentStore::in_memory();
        store.insert(record("alice", "pw", 1)).unwrap();
        assert!(matches!(
            store.insert(record("alice", "other", 2)),
            Err(NetError::Duplicate(_))
        ));
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn corrupt_file_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.json");
        std::fs::write(&path, "{\n  \"version\": 1,\n  \"records\": [ oops ]\n}\n").unwrap();
        match EnrollmentStore::load(&path) {
            Err(NetError::CorruptStore { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}

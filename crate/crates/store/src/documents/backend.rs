use std::collections::BTreeMap;
use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use parking_lot::{Mutex, RwLock};

use crate::error::{Result, StoreError};

/// Raw JSON storage keyed by collection and document id.
///
/// Implementations must make `insert` conditional: a second insert of the
/// same id fails with `Conflict` and leaves the first document untouched.
pub trait DocumentBackend: Send + Sync {
    fn insert(&self, collection: &str, id: &str, body: &str) -> Result<()>;
    fn put(&self, collection: &str, id: &str, body: &str) -> Result<()>;
    fn get(&self, collection: &str, id: &str) -> Result<Option<String>>;
    /// Replaces the document only if its current body equals `expected`.
    fn compare_and_swap(&self, collection: &str, id: &str, expected: &str, body: &str) -> Result<()>;
    /// Every document in the collection, ordered by id.
    fn list(&self, collection: &str) -> Result<Vec<(String, String)>>;
}

pub(crate) fn check_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id.len() <= 200
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
    if ok {
        Ok(())
    } else {
        Err(StoreError::Schema(format!("invalid document id {id:?}")))
    }
}

fn conflict(collection: &str, id: &str) -> StoreError {
    StoreError::Conflict(format!("{collection}/{id} already exists"))
}

#[derive(Default)]
pub struct MemoryBackend {
    docs: RwLock<BTreeMap<(String, String), String>>,
}

impl MemoryBackend {
    pub fn new() -> Self {
        Self::default()
    }
}

impl DocumentBackend for MemoryBackend {
    fn insert(&self, collection: &str, id: &str, body: &str) -> Result<()> {
        check_id(id)?;
        let mut docs = self.docs.write();
        let key = (collection.to_owned(), id.to_owned());
        if docs.contains_key(&key) {
            return Err(conflict(collection, id));
        }
        docs.insert(key, body.to_owned());
        Ok(())
    }

    fn put(&self, collection: &str, id: &str, body: &str) -> Result<()> {
        check_id(id)?;
        self.docs.write().insert((collection.to_owned(), id.to_owned()), body.to_owned());
        Ok(())
    }

    fn get(&self, collection: &str, id: &str) -> Result<Option<String>> {
        Ok(self.docs.read().get(&(collection.to_owned(), id.to_owned())).cloned())
    }

    fn compare_and_swap(&self, collection: &str, id: &str, expected: &str, body: &str) -> Result<()> {
        let mut docs = self.docs.write();
        match docs.get_mut(&(collection.to_owned(), id.to_owned())) {
            Some(current) if current == expected => {
                *current = body.to_owned();
                Ok(())
            }
            Some(_) => Err(StoreError::Conflict(format!("{collection}/{id} changed concurrently"))),
            None => Err(StoreError::NotFound(format!("{collection}/{id}"))),
        }
    }

    fn list(&self, collection: &str) -> Result<Vec<(String, String)>> {
        Ok(self
            .docs
            .read()
            .iter()
            .filter(|((c, _), _)| c == collection)
            .map(|((_, id), body)| (id.clone(), body.clone()))
            .collect())
    }
}

/// One directory per collection, one `{id}.json` file per document.
///
/// Inserts write a temporary file and hard-link it into place, so a document
/// is either absent or complete and concurrent inserts of one id cannot both
/// succeed. Compare-and-swap is serialized within the process.
pub struct FsBackend {
    root: PathBuf,
    swap: Mutex<()>,
}

impl FsBackend {
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root)?;
        Ok(Self { root, swap: Mutex::new(()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, collection: &str) -> Result<PathBuf> {
        check_id(collection)?;
        let dir = self.root.join(collection);
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    fn temp(&self, dir: &Path, body: &str) -> Result<PathBuf> {
        let path = dir.join(format!(".tmp-{}", uuid::Uuid::new_v4().simple()));
        let mut f = fs::File::create(&path)?;
        f.write_all(body.as_bytes())?;
        f.sync_all()?;
        Ok(path)
    }
}

impl DocumentBackend for FsBackend {
    fn insert(&self, collection: &str, id: &str, body: &str) -> Result<()> {
        check_id(id)?;
        let dir = self.dir(collection)?;
        let tmp = self.temp(&dir, body)?;
        let linked = fs::hard_link(&tmp, dir.join(format!("{id}.json")));
        fs::remove_file(&tmp)?;
        match linked {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(conflict(collection, id)),
            Err(e) => Err(e.into()),
        }
    }

    fn put(&self, collection: &str, id: &str, body: &str) -> Result<()> {
        check_id(id)?;
        let dir = self.dir(collection)?;
        let tmp = self.temp(&dir, body)?;
        fs::rename(tmp, dir.join(format!("{id}.json")))?;
        Ok(())
    }

    fn get(&self, collection: &str, id: &str) -> Result<Option<String>> {
        check_id(id)?;
        match fs::read_to_string(self.dir(collection)?.join(format!("{id}.json"))) {
            Ok(s) => Ok(Some(s)),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn compare_and_swap(&self, collection: &str, id: &str, expected: &str, body: &str) -> Result<()> {
        let _guard = self.swap.lock();
        match self.get(collection, id)? {
            Some(current) if current == expected => self.put(collection, id, body),
            Some(_) => Err(StoreError::Conflict(format!("{collection}/{id} changed concurrently"))),
            None => Err(StoreError::NotFound(format!("{collection}/{id}"))),
        }
    }

    fn list(&self, collection: &str) -> Result<Vec<(String, String)>> {
        let dir = self.dir(collection)?;
        let mut out = Vec::new();
        for entry in fs::read_dir(dir)? {
            let entry = entry?;
            let name = entry.file_name();
            let Some(name) = name.to_str() else { continue };
            let Some(id) = name.strip_suffix(".json") else { continue };
            if id.starts_with('.') {
                continue;
            }
            out.push((id.to_owned(), fs::read_to_string(entry.path())?));
        }
        out.sort();
        Ok(out)
    }
}

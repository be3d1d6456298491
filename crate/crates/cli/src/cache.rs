use std::fs;
use std::io::Write;
use std::path::PathBuf;

use pcanon_core::lightleaves::{DegreeBlock, GramStore};
use sha2::{Digest, Sha256};

/// Content-addressed on-disk store for Gram blocks. Files are written to a
/// temporary name and renamed, so concurrent writers never leave a partial
/// file behind. I/O failures degrade to cache misses.
pub struct DiskStore {
    dir: PathBuf,
}

impl DiskStore {
    pub fn open(dir: PathBuf) -> std::io::Result<Self> {
        let dir = dir.join("gram");
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    fn path(&self, key: &str) -> PathBuf {
        let digest = hex::encode(Sha256::digest(key.as_bytes()));
        self.dir.join(format!("{digest}.json"))
    }
}

impl GramStore for DiskStore {
    fn load(&self, key: &str) -> Option<Vec<DegreeBlock>> {
        let text = fs::read(self.path(key)).ok()?;
        let (stored_key, blocks): (String, Vec<DegreeBlock>) = serde_json::from_slice(&text).ok()?;
        // Guard against hash collisions and foreign files.
        (stored_key == key).then_some(blocks)
    }

    fn store(&self, key: &str, blocks: &[DegreeBlock]) {
        let write = || -> std::io::Result<()> {
            let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
            serde_json::to_writer(&mut tmp, &(key, blocks))?;
            tmp.flush()?;
            tmp.persist(self.path(key)).map_err(|e| e.error)?;
            Ok(())
        };
        let _ = write();
    }
}

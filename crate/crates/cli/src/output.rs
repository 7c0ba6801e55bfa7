use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Files staged in temporaries next to their destination. Nothing becomes
/// visible until `commit`, so an error before that leaves no outputs behind.
#[derive(Default)]
pub struct Staged {
    files: Vec<(tempfile::NamedTempFile, PathBuf)>,
}

impl Staged {
    pub fn add(&mut self, path: &Path, contents: &str) -> Result<()> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating temporary file in {}", dir.display()))?;
        tmp.write_all(contents.as_bytes()).with_context(|| format!("writing {}", path.display()))?;
        tmp.as_file().sync_all().with_context(|| format!("syncing {}", path.display()))?;
        self.files.push((tmp, path.to_path_buf()));
        Ok(())
    }

    /// Renames every staged file into place.
    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for (tmp, path) in self.files {
            tmp.persist(&path).with_context(|| format!("renaming into {}", path.display()))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// `dir/stem_suffix.ext` for a sibling output.
pub fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    path.with_file_name(format!("{stem}_{suffix}.{ext}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nothing_is_visible_before_commit() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        let mut staged = Staged::default();
        staged.add(&a, "hello").unwrap();
        assert!(!a.exists());
        staged.commit().unwrap();
        assert_eq!(std::fs::read_to_string(&a).unwrap(), "hello");
    }

    #[test]
    fn dropped_stage_leaves_no_files() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut staged = Staged::default();
            staged.add(&dir.path().join("a.txt"), "x").unwrap();
        }
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn sibling_keeps_directory() {
        assert_eq!(sibling(Path::new("out/traj.csv"), "linepack", "csv"), PathBuf::from("out/traj_linepack.csv"));
    }
}

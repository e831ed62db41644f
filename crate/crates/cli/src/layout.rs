//! Where each command reads and writes inside the output directory.

use std::path::{Path, PathBuf};

use crate::config::SpaceKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// `path` relative to the root, for manifests.
    pub fn relative(&self, path: &Path) -> PathBuf {
        path.strip_prefix(&self.root).unwrap_or(path).to_path_buf()
    }

    pub fn data_x(&self, split: Split) -> PathBuf {
        self.root.join("data").join(format!("{}_x.rgem", split.name()))
    }

    pub fn data_z(&self, split: Split) -> PathBuf {
        self.root.join("data").join(format!("{}_z.rgem", split.name()))
    }

    pub fn labels(&self, split: Split) -> PathBuf {
        self.root.join("data").join(format!("{}_labels.csv", split.name()))
    }

    pub fn encoder(&self, m: usize) -> PathBuf {
        self.root.join("models").join(format!("ae-{m}")).join("encoder.json")
    }

    pub fn decoder(&self, m: usize) -> PathBuf {
        self.root.join("models").join(format!("ae-{m}")).join("decoder.json")
    }

    pub fn ae_loss(&self, m: usize) -> PathBuf {
        self.root.join("models").join(format!("ae-{m}")).join("loss.csv")
    }

    pub fn diet(&self, m: usize) -> PathBuf {
        self.root.join("models").join(format!("diet-{m}")).join("head.json")
    }

    pub fn diet_loss(&self, m: usize) -> PathBuf {
        self.root.join("models").join(format!("diet-{m}")).join("loss.csv")
    }

    pub fn embedding(&self, m: usize, split: Split) -> PathBuf {
        self.root.join("embeddings").join(format!("ae-{m}-{}.rgem", split.name()))
    }

    pub fn relrep(&self, space: SpaceKind, m: usize) -> PathBuf {
        self.root.join("relrep").join(format!("{space}-{m}.rgem"))
    }

    pub fn anchors(&self) -> PathBuf {
        self.root.join("relrep").join("anchors.csv")
    }

    pub fn alignment_map(&self) -> PathBuf {
        self.result("alignment_map.json")
    }

    pub fn result(&self, name: &str) -> PathBuf {
        self.root.join("results").join(name)
    }
}

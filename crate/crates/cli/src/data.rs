use std::path::{Path, PathBuf};

use eventf2s::dataset::toy_edges;
use eventf2s::io::{read_csv_events, read_nmnist};
use eventf2s::{EventStream, Geometry, Sample};

use crate::config::{DataFormat, PipelineConfig};
use crate::error::{CliError, Result};

pub struct Splits {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl Splits {
    /// Test split when present, otherwise the training split.
    pub fn eval_set(&self) -> &[Sample] {
        if self.test.is_empty() {
            &self.train
        } else {
            &self.test
        }
    }
}

pub fn geometry(cfg: &PipelineConfig) -> Geometry {
    Geometry::new(cfg.dataset.width, cfg.dataset.height)
}

/// Reads one event file, picking the format from the extension: `.bin` is
/// N-MNIST, anything else CSV.
pub fn read_events(path: &Path, geometry: Geometry) -> Result<EventStream> {
    let is_bin = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("bin"));
    if is_bin {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        read_nmnist(&bytes, geometry).map_err(|e| CliError::data(path.display(), e))
    } else {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        read_csv_events(&text, geometry).map_err(|e| CliError::data(path.display(), e))
    }
}

pub fn load(cfg: &PipelineConfig) -> Result<Splits> {
    let d = &cfg.dataset;
    match d.format {
        DataFormat::Synthetic => {
            let s = &d.synthetic;
            let train = toy_edges(&cfg.toy_spec(s.per_class), s.train_seed);
            let test = if s.test_per_class > 0 {
                toy_edges(&cfg.toy_spec(s.test_per_class), s.test_seed)
            } else {
                Vec::new()
            };
            Ok(Splits { train, test })
        }
        DataFormat::Nmnist | DataFormat::Csv => {
            let ext = if d.format == DataFormat::Nmnist { "bin" } else { "csv" };
            let train_dir = d.train_dir.as_ref().ok_or_else(|| CliError::Config("dataset.train_dir is required".into()))?;
            let train = load_dir(train_dir, ext, d.classes, d.max_train_per_class, geometry(cfg))?;
            let test = match &d.test_dir {
                Some(dir) => load_dir(dir, ext, d.classes, d.max_test_per_class, geometry(cfg))?,
                None => Vec::new(),
            };
            if train.is_empty() {
                return Err(CliError::Data(format!("no .{ext} files under {}", train_dir.display())));
            }
            Ok(Splits { train, test })
        }
    }
}

/// `<root>/<class index>/*.<ext>`, files taken in name order, classes
/// interleaved so a truncated list stays balanced.
fn load_dir(root: &Path, ext: &str, classes: usize, max_per_class: usize, geometry: Geometry) -> Result<Vec<Sample>> {
    let mut per_class = Vec::with_capacity(classes);
    for class in 0..classes {
        let dir = root.join(class.to_string());
        let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| CliError::io(&dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext)))
            .collect();
        files.sort();
        if max_per_class > 0 {
            files.truncate(max_per_class);
        }
        let samples = files
            .iter()
            .map(|f| Ok(Sample { stream: read_events(f, geometry)?, class_label: class }))
            .collect::<Result<Vec<_>>>()?;
        per_class.push(samples.into_iter());
    }
    let mut out = Vec::new();
    loop {
        let before = out.len();
        for it in per_class.iter_mut() {
            out.extend(it.next());
        }
        if out.len() == before {
            return Ok(out);
        }
    }
}

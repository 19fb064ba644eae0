//! On-disk model format: a directory holding `spec.csv` (key,value) and
//! one `param_<name>.csv` per tensor. Tensor files carry a
//! `# shape,d1,d2,...` first line, then row-major values with one row
//! per leading index. Floats print in shortest round-trip form, so a
//! save/load cycle is bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::datasets::io::format_float;
use crate::error::{Error, Result};
use crate::models::{Family, Model, ModelSpec, Readout, RowNormalizer};
use crate::numerics::Tensor;

pub fn save_model(dir: &Path, model: &Model) -> Result<()> {
    fs::create_dir_all(dir)?;
    let s = &model.spec;
    let spec_rows = [
        ("family", s.family.as_str().to_string()),
        ("hidden_dim", s.hidden_dim.to_string()),
        ("readout", s.readout.as_str().to_string()),
        ("dropout", format_float(s.dropout)),
        ("heads", s.heads.to_string()),
        ("blocks", s.blocks.to_string()),
        ("temporal_kernel", s.temporal_kernel.to_string()),
        ("embedding_dim", s.embedding_dim.to_string()),
        ("row_normalizer", s.row_normalizer.as_str().to_string()),
        ("mlp_layers", s.mlp_layers.to_string()),
        ("cnn_stride", s.cnn_stride.to_string()),
        ("svm_c", format_float(s.svm_c)),
        ("svm_gamma", format_float(s.svm_gamma)),
    ];
    let mut spec_csv = String::from("key,value\n");
    for (k, v) in spec_rows {
        spec_csv.push_str(&format!("{k},{v}\n"));
    }
    fs::write(dir.join("spec.csv"), spec_csv)?;

    for (name, tensor) in &model.params {
        let mut body = String::from("# shape");
        for d in tensor.shape() {
            body.push_str(&format!(",{d}"));
        }
        body.push('\n');
        let leading = tensor.shape()[0];
        let row_len = tensor.numel() / leading;
        for r in 0..leading {
            let row: Vec<String> = tensor.values()[r * row_len..(r + 1) * row_len]
                .iter()
                .map(|&v| format_float(v))
                .collect();
            body.push_str(&row.join(","));
            body.push('\n');
        }
        fs::write(dir.join(format!("param_{name}.csv")), body)?;
    }
    Ok(())
}

fn parse_spec(path: &Path) -> Result<ModelSpec> {
    let text = fs::read_to_string(path)?;
    let mut kv = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if line != "key,value" {
                return Err(Error::Schema(format!("bad spec header {line:?}")));
            }
            continue;
        }
        let (k, v) = line
            .split_once(',')
            .ok_or_else(|| Error::Schema(format!("bad spec row {line:?}")))?;
        kv.insert(k.to_string(), v.to_string());
    }
    let get = |key: &str| -> Result<&String> {
        kv.get(key).ok_or_else(|| Error::Schema(format!("spec.csv missing key {key}")))
    };
    let usize_of = |key: &str| -> Result<usize> {
        get(key)?.parse().map_err(|_| Error::Schema(format!("bad integer for {key}")))
    };
    let f64_of = |key: &str| -> Result<f64> {
        get(key)?.parse().map_err(|_| Error::Schema(format!("bad float for {key}")))
    };
    let mut spec = ModelSpec::new(Family::parse(get("family")?)?);
    spec.hidden_dim = usize_of("hidden_dim")?;
    spec.readout = Readout::parse(get("readout")?)?;
    spec.dropout = f64_of("dropout")?;
    spec.heads = usize_of("heads")?;
    spec.blocks = usize_of("blocks")?;
    spec.temporal_kernel = usize_of("temporal_kernel")?;
    spec.embedding_dim = usize_of("embedding_dim")?;
    spec.row_normalizer = RowNormalizer::parse(get("row_normalizer")?)?;
    spec.mlp_layers = usize_of("mlp_layers")?;
    spec.cnn_stride = usize_of("cnn_stride")?;
    spec.svm_c = f64_of("svm_c")?;
    spec.svm_gamma = f64_of("svm_gamma")?;
    spec.validate()?;
    Ok(spec)
}

fn parse_param(path: &Path) -> Result<Tensor> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Schema(format!("{}: empty parameter file", path.display())))?;
    let dims_part = header
        .strip_prefix("# shape")
        .ok_or_else(|| Error::Schema(format!("{}: missing shape header", path.display())))?;
    let shape: Vec<usize> = dims_part
        .split(',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Schema(format!("bad shape field {s:?}"))))
        .collect::<Result<_>>()?;
    if shape.is_empty() {
        return Err(Error::Schema(format!("{}: empty shape", path.display())));
    }
    let mut data = Vec::new();
    for line in lines {
        for field in line.split(',') {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Schema(format!("bad value {field:?} in {}", path.display())))?;
            data.push(v);
        }
    }
    Tensor::new(shape, data)
}

pub fn load_model(dir: &Path) -> Result<Model> {
    let spec = parse_spec(&dir.join("spec.csv"))?;
    let mut params = BTreeMap::new();
    let mut entries: Vec<_> = fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    entries.sort();
    for file in entries {
        if let Some(stem) = file.strip_prefix("param_").and_then(|f| f.strip_suffix(".csv")) {
            params.insert(stem.to_string(), parse_param(&dir.join(&file))?);
        }
    }
    if params.is_empty() {
        return Err(Error::Schema(format!("{}: no parameter files", dir.display())));
    }
    Ok(Model { spec, params })
}

//! DNN layer profiles and partition-point accounting.
//!
//! A model is a sequence of atomic compute layers (pooling and activations are
//! already folded into the preceding conv/dense layer). Cutting after layer `l`
//! runs layers `1..=l` on the device and `l+1..=L` on the edge server.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ProfileError;

/// Bytes per tensor element (single precision).
pub const ELEM_BYTES: u64 = 4;

/// Leakage anchors of the VGG16 reference curve, as (partition point, score)
/// for a 16-layer model. Other depths are mapped through normalized depth.
const VGG16_LEAKAGE_ANCHORS: [(u64, f64); 5] =
    [(0, 1.0), (2, 0.99), (8, 0.59), (14, 0.35), (16, 0.0)];

pub fn conv_output_bytes(elem_bytes: u64, h: u64, w: u64, c: u64) -> u64 {
    elem_bytes * h * w * c
}

pub fn dense_output_bytes(elem_bytes: u64, v: u64) -> u64 {
    elem_bytes * v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Dense,
}

/// Output shape of a layer: `(H, W, C)` for conv layers, `V` for dense ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutDims {
    Conv { h: u64, w: u64, c: u64 },
    Dense { v: u64 },
}

impl OutDims {
    pub fn bytes(&self) -> u64 {
        match *self {
            OutDims::Conv { h, w, c } => conv_output_bytes(ELEM_BYTES, h, w, c),
            OutDims::Dense { v } => dense_output_bytes(ELEM_BYTES, v),
        }
    }

    fn to_vec(self) -> Vec<u64> {
        match self {
            OutDims::Conv { h, w, c } => vec![h, w, c],
            OutDims::Dense { v } => vec![v],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LayerRecord", into = "LayerRecord")]
pub struct LayerProfile {
    pub kind: LayerKind,
    pub flops: u64,
    pub param_bytes: u64,
    pub out_dims: OutDims,
}

impl LayerProfile {
    pub fn out_bytes(&self) -> u64 {
        self.out_dims.bytes()
    }
}

/// On-disk form of a layer; `out_dims` is a bare array whose arity must match `kind`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerRecord {
    kind: LayerKind,
    flops: u64,
    param_bytes: u64,
    out_dims: Vec<u64>,
}

impl TryFrom<LayerRecord> for LayerProfile {
    type Error = String;

    fn try_from(r: LayerRecord) -> Result<Self, Self::Error> {
        let out_dims = match (r.kind, r.out_dims.as_slice()) {
            (LayerKind::Conv, &[h, w, c]) => OutDims::Conv { h, w, c },
            (LayerKind::Dense, &[v]) => OutDims::Dense { v },
            (kind, dims) => {
                return Err(format!(
                    "{kind:?} layer needs {} output dims, got {}",
                    if kind == LayerKind::Conv { 3 } else { 1 },
                    dims.len()
                ))
            }
        };
        Ok(LayerProfile {
            kind: r.kind,
            flops: r.flops,
            param_bytes: r.param_bytes,
            out_dims,
        })
    }
}

impl From<LayerProfile> for LayerRecord {
    fn from(l: LayerProfile) -> Self {
        LayerRecord {
            kind: l.kind,
            flops: l.flops,
            param_bytes: l.param_bytes,
            out_dims: l.out_dims.to_vec(),
        }
    }
}

/// Layer table of one deployable DNN service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProfile {
    pub model_id: usize,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    pub layers: Vec<LayerProfile>,
    /// Raw input size of one sample.
    pub raw_input_bytes: u64,
    /// Storage footprint of the whole model (parameters plus metadata).
    pub total_bytes: u64,
    /// Reconstruction-leakage score per partition point, `layers.len() + 1` entries.
    pub leakage_table: Vec<f64>,
}

/// Quantities determined by a partition point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionSummary {
    /// Parameters of the device-side layers, downloaded from the server.
    pub download_bytes: u64,
    pub local_flops: u64,
    pub edge_flops: u64,
    /// Per-sample upload volume: the last local layer's output.
    pub upload_bytes: u64,
    pub leakage: f64,
}

impl ModelProfile {
    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn total_flops(&self) -> u64 {
        self.layers.iter().map(|l| l.flops).sum()
    }

    pub fn raw_input_mb(&self) -> f64 {
        self.raw_input_bytes as f64 / 1e6
    }

    fn check_point(&self, l: usize) -> Result<(), ProfileError> {
        if l > self.layers.len() {
            return Err(ProfileError::PartitionOutOfRange {
                model: self.model_id,
                point: l,
                layers: self.layers.len(),
            });
        }
        Ok(())
    }

    pub fn partition_summary(&self, l: usize) -> Result<PartitionSummary, ProfileError> {
        self.check_point(l)?;
        let (front, back) = self.layers.split_at(l);
        let upload_bytes = if l == 0 {
            self.raw_input_bytes
        } else if l == self.layers.len() {
            0
        } else {
            front[l - 1].out_bytes()
        };
        Ok(PartitionSummary {
            download_bytes: front.iter().map(|x| x.param_bytes).sum(),
            local_flops: front.iter().map(|x| x.flops).sum(),
            edge_flops: back.iter().map(|x| x.flops).sum(),
            upload_bytes,
            leakage: self.leakage_table[l],
        })
    }

    pub fn leakage_at(&self, l: usize) -> Result<f64, ProfileError> {
        self.check_point(l)?;
        Ok(self.leakage_table[l])
    }

    /// Checks every structural invariant, naming the first offending item.
    pub fn validate(&self) -> Result<(), ProfileError> {
        let fail = |layer: Option<usize>, reason: String| ProfileError::Invariant {
            model: self.model_id,
            layer,
            reason,
        };
        if self.layers.is_empty() {
            return Err(fail(None, "model has no layers".into()));
        }
        let params: u64 = self.layers.iter().map(|l| l.param_bytes).sum();
        if self.total_bytes < params {
            return Err(fail(
                None,
                format!("total_bytes {} below parameter bytes {params}", self.total_bytes),
            ));
        }
        let n = self.layers.len();
        if self.leakage_table.len() != n + 1 {
            return Err(fail(
                None,
                format!("leakage_table has {} entries, expected {}", self.leakage_table.len(), n + 1),
            ));
        }
        for (l, &v) in self.leakage_table.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(fail(Some(l), format!("leakage {v} outside [0,1]")));
            }
            if l > 0 && v > self.leakage_table[l - 1] {
                return Err(fail(Some(l), "leakage_table is not non-increasing".into()));
            }
        }
        if self.leakage_table[0] != 1.0 {
            return Err(fail(Some(0), "leakage at partition point 0 must be 1".into()));
        }
        if self.leakage_table[n] != 0.0 {
            return Err(fail(Some(n), "leakage at the last partition point must be 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CatalogFile {
    models: Vec<ModelProfile>,
}

/// Reads and validates a JSON profile catalog. Model ids must be `0..I` in order.
pub fn load_catalog(path: impl AsRef<Path>) -> Result<Vec<ModelProfile>, ProfileError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ProfileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_catalog(&text)
}

pub fn parse_catalog(text: &str) -> Result<Vec<ModelProfile>, ProfileError> {
    let file: CatalogFile = serde_json::from_str(text)?;
    for (pos, m) in file.models.iter().enumerate() {
        if m.model_id != pos {
            return Err(ProfileError::Invariant {
                model: m.model_id,
                layer: None,
                reason: format!("model_id must equal catalog position {pos}"),
            });
        }
        m.validate()?;
    }
    Ok(file.models)
}

pub fn catalog_to_json(models: &[ModelProfile]) -> String {
    serde_json::to_string_pretty(&CatalogFile {
        models: models.to_vec(),
    })
    .expect("catalog serialization cannot fail")
}

/// Base architectures the synthetic catalog knows how to lay out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaseFamily {
    #[serde(rename = "lenet7")]
    LeNet7,
    #[serde(rename = "lenet9")]
    LeNet9,
    #[serde(rename = "lenet12")]
    LeNet12,
    #[serde(rename = "resnet18")]
    ResNet18,
    #[serde(rename = "resnet34")]
    ResNet34,
    #[serde(rename = "resnet50")]
    ResNet50,
    #[serde(rename = "vgg13")]
    Vgg13,
    #[serde(rename = "vgg16")]
    Vgg16,
    #[serde(rename = "vgg19")]
    Vgg19,
}

impl BaseFamily {
    pub const ALL: [BaseFamily; 9] = [
        BaseFamily::LeNet7,
        BaseFamily::LeNet9,
        BaseFamily::LeNet12,
        BaseFamily::ResNet18,
        BaseFamily::ResNet34,
        BaseFamily::ResNet50,
        BaseFamily::Vgg13,
        BaseFamily::Vgg16,
        BaseFamily::Vgg19,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaseFamily::LeNet7 => "lenet7",
            BaseFamily::LeNet9 => "lenet9",
            BaseFamily::LeNet12 => "lenet12",
            BaseFamily::ResNet18 => "resnet18",
            BaseFamily::ResNet34 => "resnet34",
            BaseFamily::ResNet50 => "resnet50",
            BaseFamily::Vgg13 => "vgg13",
            BaseFamily::Vgg16 => "vgg16",
            BaseFamily::Vgg19 => "vgg19",
        }
    }

    /// Input (H, W, C) and the atomic layer table of the reference architecture.
    fn layout(self) -> ((u64, u64, u64), Vec<LayerProfile>) {
        match self {
            BaseFamily::LeNet7 => lenet(&[16, 32, 64, 64], &[256, 128]),
            BaseFamily::LeNet9 => lenet(&[16, 32, 32, 64, 64, 128], &[256, 128]),
            BaseFamily::LeNet12 => lenet(&[16, 16, 32, 32, 64, 64, 128, 128, 128], &[256, 128]),
            BaseFamily::ResNet18 => resnet(&[2, 2, 2, 2], false),
            BaseFamily::ResNet34 => resnet(&[3, 4, 6, 3], false),
            BaseFamily::ResNet50 => resnet(&[3, 4, 6, 3], true),
            BaseFamily::Vgg13 => vgg(&[2, 2, 2, 2, 2]),
            BaseFamily::Vgg16 => vgg(&[2, 2, 3, 3, 3]),
            BaseFamily::Vgg19 => vgg(&[2, 2, 4, 4, 4]),
        }
    }

    /// Reference profile of the base architecture (no per-service variation).
    pub fn reference_profile(self, model_id: usize) -> ModelProfile {
        let ((h, w, c), layers) = self.layout();
        let params: u64 = layers.iter().map(|l| l.param_bytes).sum();
        let leakage_table = reference_leakage(layers.len());
        ModelProfile {
            model_id,
            name: self.name().to_string(),
            raw_input_bytes: conv_output_bytes(ELEM_BYTES, h, w, c),
            total_bytes: params + params / 100,
            leakage_table,
            layers,
        }
    }
}

struct Shape {
    h: u64,
    c: u64,
}

fn conv_layer(s: &mut Shape, cout: u64, k: u64, stride: u64, pool: bool) -> LayerProfile {
    let out_h = s.h / stride;
    let flops = 2 * out_h * out_h * s.c * cout * k * k;
    let param_bytes = ELEM_BYTES * (k * k * s.c * cout + cout);
    let h = if pool { out_h / 2 } else { out_h };
    s.h = h;
    s.c = cout;
    LayerProfile {
        kind: LayerKind::Conv,
        flops,
        param_bytes,
        out_dims: OutDims::Conv { h, w: h, c: cout },
    }
}

fn dense_layer(fan_in: u64, out: u64) -> LayerProfile {
    LayerProfile {
        kind: LayerKind::Dense,
        flops: 2 * fan_in * out,
        param_bytes: ELEM_BYTES * (fan_in * out + out),
        out_dims: OutDims::Dense { v: out },
    }
}

fn lenet(convs: &[u64], dense: &[u64]) -> ((u64, u64, u64), Vec<LayerProfile>) {
    let mut s = Shape { h: 32, c: 3 };
    let mut layers = Vec::new();
    for (n, &c) in convs.iter().enumerate() {
        // pool after every other conv while the map is still large
        let pool = n % 2 == 1 || convs.len() <= 4;
        let pool = pool && s.h > 2;
        layers.push(conv_layer(&mut s, c, 3, 1, pool));
    }
    let mut fan_in = s.h * s.h * s.c;
    for &d in dense {
        layers.push(dense_layer(fan_in, d));
        fan_in = d;
    }
    layers.push(dense_layer(fan_in, 10));
    ((32, 32, 3), layers)
}

fn resnet(blocks: &[u64], bottleneck: bool) -> ((u64, u64, u64), Vec<LayerProfile>) {
    let mut s = Shape { h: 224, c: 3 };
    // stem: 7x7/2 conv with the 3x3/2 max-pool folded in
    let mut layers = vec![conv_layer(&mut s, 64, 7, 2, true)];
    let widths = [64u64, 128, 256, 512];
    for (stage, (&n, &width)) in blocks.iter().zip(widths.iter()).enumerate() {
        for b in 0..n {
            let stride = if stage > 0 && b == 0 { 2 } else { 1 };
            let out_h = s.h / stride;
            let (flops, params, cout) = if bottleneck {
                let cout = width * 4;
                let f = 2 * out_h * out_h * (s.c * width + 9 * width * width + width * cout);
                let p = s.c * width + 9 * width * width + width * cout + 2 * width + cout;
                (f, p, cout)
            } else {
                let f = 2 * out_h * out_h * 9 * (s.c * width + width * width);
                let p = 9 * (s.c * width + width * width) + 2 * width;
                (f, p, width)
            };
            s.h = out_h;
            s.c = cout;
            layers.push(LayerProfile {
                kind: LayerKind::Conv,
                flops,
                param_bytes: ELEM_BYTES * params,
                out_dims: OutDims::Conv {
                    h: out_h,
                    w: out_h,
                    c: cout,
                },
            });
        }
    }
    // global average pool folded into the classifier
    layers.push(dense_layer(s.c, 1000));
    ((224, 224, 3), layers)
}

fn vgg(stages: &[u64]) -> ((u64, u64, u64), Vec<LayerProfile>) {
    let mut s = Shape { h: 224, c: 3 };
    let widths = [64u64, 128, 256, 512, 512];
    let mut layers = Vec::new();
    for (&n, &width) in stages.iter().zip(widths.iter()) {
        for b in 0..n {
            layers.push(conv_layer(&mut s, width, 3, 1, b + 1 == n));
        }
    }
    let fan_in = s.h * s.h * s.c;
    layers.push(dense_layer(fan_in, 4096));
    layers.push(dense_layer(4096, 4096));
    layers.push(dense_layer(4096, 1000));
    ((224, 224, 3), layers)
}

/// Leakage curve for a model with `layers` partitionable layers: the VGG16
/// anchors placed at normalized depth and linearly interpolated between them.
pub fn reference_leakage(layers: usize) -> Vec<f64> {
    let n = layers as f64;
    (0..=layers)
        .map(|l| {
            if l == 0 {
                return 1.0;
            }
            if l == layers {
                return 0.0;
            }
            let u = l as f64 / n * 16.0;
            if let Some(&(_, y)) = VGG16_LEAKAGE_ANCHORS.iter().find(|a| a.0 as f64 == u) {
                return y;
            }
            let seg = VGG16_LEAKAGE_ANCHORS
                .windows(2)
                .find(|w| u <= w[1].0 as f64)
                .expect("normalized depth lies within the anchor range");
            let (x0, y0) = (seg[0].0 as f64, seg[0].1);
            let (x1, y1) = (seg[1].0 as f64, seg[1].1);
            y0 + (y1 - y0) * (u - x0) / (x1 - x0)
        })
        .collect()
}

/// Builds `families.len() * services_per_model` profiles. Ids interleave
/// families (`id = service * F + family`) so popularity ranks spread across
/// architectures. Service 0 of each family is the reference architecture;
/// further services scale per-layer FLOPs and parameters by a seeded factor
/// in [0.9, 1.1].
pub fn synth_catalog(families: &[BaseFamily], services_per_model: usize, seed: u64) -> Vec<ModelProfile> {
    assert!(services_per_model >= 1, "services_per_model must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(families.len() * services_per_model);
    for service in 0..services_per_model {
        for &family in families {
            let id = out.len();
            let mut p = family.reference_profile(id);
            p.name = format!("{}-s{service}", family.name());
            if service > 0 {
                for layer in &mut p.layers {
                    let f: f64 = rng.random_range(0.9..1.1);
                    layer.flops = (layer.flops as f64 * f).round() as u64;
                    layer.param_bytes = (layer.param_bytes as f64 * f).round() as u64;
                }
                let params: u64 = p.layers.iter().map(|l| l.param_bytes).sum();
                p.total_bytes = params + params / 100;
            }
            out.push(p);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy() -> ModelProfile {
        let layer = |flops, param_bytes, v| LayerProfile {
            kind: LayerKind::Dense,
            flops,
            param_bytes,
            out_dims: OutDims::Dense { v },
        };
        ModelProfile {
            model_id: 0,
            name: "toy".into(),
            layers: vec![
                layer(10_000_000, 1_000_000, 25_000),
                layer(20_000_000, 2_000_000, 12_500),
                layer(30_000_000, 3_000_000, 2_500),
            ],
            raw_input_bytes: 200_000,
            total_bytes: 6_000_000,
            leakage_table: vec![1.0, 0.7, 0.4, 0.0],
        }
    }

    #[test]
    fn output_byte_formulas() {
        assert_eq!(conv_output_bytes(4, 112, 112, 64), 3_211_264);
        assert_eq!(conv_output_bytes(4, 1, 1, 1), 4);
        assert_eq!(conv_output_bytes(4, 0, 5, 5), 0);
        assert_eq!(dense_output_bytes(4, 1000), 4000);
        assert_eq!(dense_output_bytes(4, 0), 0);
        assert_eq!(dense_output_bytes(4, 1), 4);
    }

    #[test]
    fn toy_partition_summaries() {
        let p = toy();
        let s = p.partition_summary(2).unwrap();
        assert_eq!(s.download_bytes, 3_000_000);
        assert_eq!(s.local_flops, 30_000_000);
        assert_eq!(s.edge_flops, 30_000_000);
        assert_eq!(s.upload_bytes, 50_000);

        let s0 = p.partition_summary(0).unwrap();
        assert_eq!(
            (s0.download_bytes, s0.local_flops, s0.edge_flops, s0.upload_bytes),
            (0, 0, 60_000_000, 200_000)
        );
        assert_eq!(s0.leakage, 1.0);

        let s3 = p.partition_summary(3).unwrap();
        assert_eq!(
            (s3.download_bytes, s3.local_flops, s3.edge_flops, s3.upload_bytes),
            (6_000_000, 60_000_000, 0, 0)
        );
        assert_eq!(s3.leakage, 0.0);
    }

    #[test]
    fn out_of_range_partition_rejected() {
        let p = toy();
        assert!(matches!(
            p.partition_summary(4),
            Err(ProfileError::PartitionOutOfRange { point: 4, .. })
        ));
        assert!(p.leakage_at(4).is_err());
    }

    #[test]
    fn vgg16_leakage_anchors() {
        let p = BaseFamily::Vgg16.reference_profile(0);
        assert_eq!(p.layer_count(), 16);
        assert_eq!(p.leakage_at(2).unwrap(), 0.99);
        assert_eq!(p.leakage_at(8).unwrap(), 0.59);
        assert_eq!(p.leakage_at(14).unwrap(), 0.35);
        assert_eq!(p.leakage_at(0).unwrap(), 1.0);
        assert_eq!(p.leakage_at(16).unwrap(), 0.0);
    }

    #[test]
    fn reference_architectures_are_plausible() {
        let vgg = BaseFamily::Vgg16.reference_profile(0);
        let gflop = vgg.total_flops() as f64 / 1e9;
        assert!((28.0..34.0).contains(&gflop), "vgg16 {gflop} GFLOP");
        let mb = vgg.total_bytes as f64 / 1e6;
        assert!((540.0..570.0).contains(&mb), "vgg16 {mb} MB");
        let r18 = BaseFamily::ResNet18.reference_profile(0);
        assert_eq!(r18.layer_count(), 10);
        let r50 = BaseFamily::ResNet50.reference_profile(0);
        assert_eq!(r50.layer_count(), 18);
        assert_eq!(BaseFamily::Vgg19.reference_profile(0).layer_count(), 19);
        assert_eq!(BaseFamily::LeNet7.reference_profile(0).layer_count(), 7);
        assert_eq!(BaseFamily::LeNet9.reference_profile(0).layer_count(), 9);
        assert_eq!(BaseFamily::LeNet12.reference_profile(0).layer_count(), 12);
        for f in BaseFamily::ALL {
            f.reference_profile(0).validate().unwrap();
        }
    }

    #[test]
    fn synth_catalog_counts_and_determinism() {
        let a = synth_catalog(&BaseFamily::ALL, 5, 7);
        assert_eq!(a.len(), 45);
        assert_eq!(synth_catalog(&BaseFamily::ALL, 1, 7).len(), 9);
        let b = synth_catalog(&BaseFamily::ALL, 5, 7);
        assert_eq!(catalog_to_json(&a), catalog_to_json(&b));
        for (i, m) in a.iter().enumerate() {
            assert_eq!(m.model_id, i);
            m.validate().unwrap();
        }
    }

    #[test]
    fn catalog_invariant_errors() {
        let mut bad = toy();
        bad.leakage_table[0] = 0.8;
        let text = catalog_to_json(&[bad]);
        assert!(matches!(parse_catalog(&text), Err(ProfileError::Invariant { .. })));

        let mut bad = toy();
        bad.leakage_table = vec![1.0, 0.4, 0.6, 0.0];
        let err = parse_catalog(&catalog_to_json(&[bad])).unwrap_err();
        assert!(err.to_string().contains("non-increasing"), "{err}");

        let mut bad = toy();
        bad.total_bytes = 10;
        assert!(parse_catalog(&catalog_to_json(&[bad])).is_err());

        assert!(matches!(parse_catalog("{ not json"), Err(ProfileError::Parse(_))));
    }

    #[test]
    fn out_dims_arity_checked_on_parse() {
        let text = r#"{"models":[{"model_id":0,"layers":[{"kind":"conv","flops":1,"param_bytes":1,"out_dims":[3]}],
            "raw_input_bytes":4,"total_bytes":4,"leakage_table":[1.0,0.0]}]}"#;
        assert!(matches!(parse_catalog(text), Err(ProfileError::Parse(_))));
    }

    #[test]
    fn two_model_round_trip() {
        let mut second = toy();
        second.model_id = 1;
        let models = vec![toy(), second];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("catalog.json");
        std::fs::write(&path, catalog_to_json(&models)).unwrap();
        let loaded = load_catalog(&path).unwrap();
        assert_eq!(loaded, models);
    }

    #[test]
    fn summary_monotonicity_over_catalog() {
        for m in synth_catalog(&BaseFamily::ALL, 2, 3) {
            let total = m.total_flops();
            let mut prev: Option<PartitionSummary> = None;
            for l in 0..=m.layer_count() {
                let s = m.partition_summary(l).unwrap();
                assert_eq!(s.local_flops + s.edge_flops, total);
                if let Some(p) = prev {
                    assert!(s.download_bytes >= p.download_bytes);
                    assert!(s.leakage <= p.leakage);
                }
                prev = Some(s);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn byte_formulas_match_reevaluation(h in 0u64..4096, w in 0u64..4096, c in 0u64..4096, v in 0u64..1_000_000) {
            let conv = OutDims::Conv { h, w, c }.bytes();
            prop_assert_eq!(conv, h * w * c * 4);
            prop_assert_eq!(conv_output_bytes(ELEM_BYTES, h, w, c), conv);
            prop_assert_eq!(OutDims::Dense { v }.bytes(), v * 4);
        }
    }
}

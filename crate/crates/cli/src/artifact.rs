//! Artifacts stored in `DCW1` containers.
//!
//! | tag    | payload |
//! |--------|---------|
//! | `KIND` | UTF-8 artifact kind: `world`, `exact_model`, `count_model` or `codebook` |
//! | `CONF` | UTF-8 config the artifact was built from |
//! | `WSPC` | world spec, see [`write_world_spec`] |
//! | `CMHD` | count model header: grid_w, grid_h, n_shapes, n_colors (u32), alpha, dropout_prob (f64) |
//! | `CLBL` | count model labels: u32 count, then strings in label-id order |
//! | `CFUL` | count model contexts: u64 count, then per entry position (u16), label id (u32, `u32::MAX` for none), vocab window bytes, vocab u32 counts |
//! | `CBHD` | codebook header: patch_h, patch_w, channels, K (u32) |
//! | `CBEN` | codebook entries: K x D f64, row-major |
//! | `CBHI` | k-means objective history: u32 count, f64 values |
//!
//! Strings are a u32 byte length followed by UTF-8. Per-slot coarse counts
//! of a count model are not stored; they are rebuilt on load.

use std::fmt::Write as _;
use std::path::Path;

use discomp_core::vq::{Codebook, PatchShape};
use discomp_core::world::{ContextKey, FactorizedCondition, FactorizedWorldSpec, SceneWorldSpec};
use discomp_core::{ConditionSpec, CountModel, TokenLayout, WorldSpec};

use crate::container::{ByteReader, ByteWriter, Container, ContainerError};

const NO_LABEL: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    World { spec: WorldSpec },
    ExactModel { world: WorldSpec },
    CountModel { world: WorldSpec, model: CountModel },
    Codebook { codebook: Codebook, history: Vec<f64> },
}

impl Artifact {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::World { .. } => "world",
            Self::ExactModel { .. } => "exact_model",
            Self::CountModel { .. } => "count_model",
            Self::Codebook { .. } => "codebook",
        }
    }

    pub fn world_spec(&self) -> Option<&WorldSpec> {
        match self {
            Self::World { spec } => Some(spec),
            Self::ExactModel { world } | Self::CountModel { world, .. } => Some(world),
            Self::Codebook { .. } => None,
        }
    }

    pub fn to_container(&self, config: &str) -> Container {
        let mut c = Container::default();
        c.push(b"KIND", self.kind().as_bytes().to_vec());
        c.push(b"CONF", config.as_bytes().to_vec());
        match self {
            Self::World { spec } | Self::ExactModel { world: spec } => {
                c.push(b"WSPC", write_world_spec(spec));
            }
            Self::CountModel { world, model } => {
                c.push(b"WSPC", write_world_spec(world));
                let (hd, lbl, ful) = write_count_model(model);
                c.push(b"CMHD", hd);
                c.push(b"CLBL", lbl);
                c.push(b"CFUL", ful);
            }
            Self::Codebook { codebook, history } => {
                let s = codebook.shape();
                let mut hd = ByteWriter::default();
                hd.u32(s.patch_h as u32).u32(s.patch_w as u32).u32(s.channels as u32).u32(codebook.len() as u32);
                c.push(b"CBHD", hd.into_inner());
                let mut en = ByteWriter::default();
                codebook.as_flat().iter().for_each(|&x| {
                    en.f64(x);
                });
                c.push(b"CBEN", en.into_inner());
                let mut hi = ByteWriter::default();
                hi.u32(history.len() as u32);
                history.iter().for_each(|&x| {
                    hi.f64(x);
                });
                c.push(b"CBHI", hi.into_inner());
            }
        }
        c
    }

    /// Returns the artifact and the config text it was built from.
    pub fn from_container(c: &Container) -> Result<(Self, String), ContainerError> {
        let kind = utf8(c.get(b"KIND")?, "KIND")?;
        let config = utf8(c.get(b"CONF")?, "CONF")?;
        let art = match kind.as_str() {
            "world" => Self::World { spec: read_world_spec(c.get(b"WSPC")?)? },
            "exact_model" => Self::ExactModel { world: read_world_spec(c.get(b"WSPC")?)? },
            "count_model" => Self::CountModel {
                world: read_world_spec(c.get(b"WSPC")?)?,
                model: read_count_model(c.get(b"CMHD")?, c.get(b"CLBL")?, c.get(b"CFUL")?)?,
            },
            "codebook" => {
                let (codebook, history) = read_codebook(c.get(b"CBHD")?, c.get(b"CBEN")?, c.get(b"CBHI")?)?;
                Self::Codebook { codebook, history }
            }
            other => {
                return Err(ContainerError::Malformed { tag: "KIND".into(), msg: format!("unknown kind {other:?}") })
            }
        };
        Ok((art, config))
    }

    pub fn save(&self, path: &Path, config: &str) -> Result<(), ContainerError> {
        std::fs::write(path, self.to_container(config).to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(Self, String), ContainerError> {
        let bytes = std::fs::read(path)?;
        Self::from_container(&Container::from_bytes(&bytes)?)
    }
}

fn utf8(b: &[u8], tag: &str) -> Result<String, ContainerError> {
    String::from_utf8(b.to_vec()).map_err(|_| ContainerError::Malformed { tag: tag.into(), msg: "invalid UTF-8".into() })
}

/// World spec payload. A leading byte selects the variant:
///
/// * `0` scene: grid_w, grid_h, n_shapes, n_colors, min_objects,
///   max_objects (u32), relational (u8)
/// * `1` factorized: grid_w, grid_h, vocab (u32), `L x vocab` prior f64,
///   u32 condition count, then per condition its text, u32 cell count and
///   per cell the index (u32) and `vocab` f64
pub fn write_world_spec(spec: &WorldSpec) -> Vec<u8> {
    let mut w = ByteWriter::default();
    match spec {
        WorldSpec::Scene(s) => {
            w.u8(0);
            for v in [s.grid_w, s.grid_h, s.n_shapes, s.n_colors, s.min_objects, s.max_objects] {
                w.u32(v as u32);
            }
            w.u8(s.relational as u8);
        }
        WorldSpec::Factorized(f) => {
            w.u8(1).u32(f.grid_w as u32).u32(f.grid_h as u32).u32(f.vocab as u32);
            for x in f.prior.iter().flatten() {
                w.f64(*x);
            }
            w.u32(f.conditions.len() as u32);
            for c in &f.conditions {
                w.str(&c.spec.to_string()).u32(c.cells.len() as u32);
                for (cell, table) in &c.cells {
                    w.u32(*cell as u32);
                    table.iter().for_each(|&x| {
                        w.f64(x);
                    });
                }
            }
        }
    }
    w.into_inner()
}

pub fn read_world_spec(b: &[u8]) -> Result<WorldSpec, ContainerError> {
    let mut r = ByteReader::new(b, "WSPC");
    let spec = match r.u8()? {
        0 => {
            let mut v = [0usize; 6];
            for x in &mut v {
                *x = r.usize()?;
            }
            let relational = r.u8()? != 0;
            WorldSpec::Scene(SceneWorldSpec {
                grid_w: v[0],
                grid_h: v[1],
                n_shapes: v[2],
                n_colors: v[3],
                min_objects: v[4],
                max_objects: v[5],
                relational,
            })
        }
        1 => {
            let (grid_w, grid_h, vocab) = (r.usize()?, r.usize()?, r.usize()?);
            let cells = grid_w.checked_mul(grid_h).filter(|&n| n <= 1 << 16).ok_or_else(|| r.malformed("grid too large"))?;
            if vocab > 1 << 16 {
                return Err(r.malformed("vocabulary too large"));
            }
            let mut prior = Vec::with_capacity(cells);
            for _ in 0..cells {
                prior.push((0..vocab).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?);
            }
            let n = r.usize()?;
            let mut conditions = Vec::new();
            for _ in 0..n {
                let text = r.str()?;
                let spec: ConditionSpec = text.parse().map_err(|_| r.malformed(&format!("bad condition {text:?}")))?;
                let m = r.usize()?;
                let mut cs = Vec::new();
                for _ in 0..m {
                    let cell = r.usize()?;
                    cs.push((cell, (0..vocab).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?));
                }
                conditions.push(FactorizedCondition { spec, cells: cs });
            }
            WorldSpec::Factorized(FactorizedWorldSpec { grid_w, grid_h, vocab, prior, conditions })
        }
        k => return Err(r.malformed(&format!("unknown world variant {k}"))),
    };
    r.finish()?;
    Ok(spec)
}

fn write_count_model(m: &CountModel) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
    let l = m.layout();
    let mut hd = ByteWriter::default();
    hd.u32(l.grid_w as u32).u32(l.grid_h as u32).u32(l.n_shapes as u32).u32(l.n_colors as u32);
    hd.f64(m.alpha()).f64(m.dropout_prob());

    let mut lbl = ByteWriter::default();
    lbl.u32(m.labels().len() as u32);
    for c in m.labels() {
        lbl.str(&c.to_string());
    }

    let mut ful = ByteWriter::default();
    ful.u64(m.counts().count() as u64);
    for (key, counts) in m.counts() {
        ful.u16(key.position).u32(key.label.unwrap_or(NO_LABEL));
        key.window.iter().for_each(|&b| {
            ful.u8(b);
        });
        counts.iter().for_each(|&c| {
            ful.u32(c);
        });
    }
    (hd.into_inner(), lbl.into_inner(), ful.into_inner())
}

fn read_count_model(hd: &[u8], lbl: &[u8], ful: &[u8]) -> Result<CountModel, ContainerError> {
    let mut r = ByteReader::new(hd, "CMHD");
    let (w, h, s, c) = (r.usize()?, r.usize()?, r.usize()?, r.usize()?);
    let layout = TokenLayout::new(w, h, s, c).map_err(|e| r.malformed(&e.to_string()))?;
    let (alpha, dropout) = (r.f64()?, r.f64()?);
    r.finish()?;

    let mut r = ByteReader::new(lbl, "CLBL");
    let n = r.usize()?;
    let mut labels = Vec::new();
    for _ in 0..n {
        let text = r.str()?;
        labels.push(text.parse::<ConditionSpec>().map_err(|_| r.malformed(&format!("bad label {text:?}")))?);
    }
    r.finish()?;

    let mut r = ByteReader::new(ful, "CFUL");
    let vocab = layout.vocab();
    let n = r.u64()?;
    let mut counts = Vec::new();
    for _ in 0..n {
        let position = r.u16()?;
        let label = match r.u32()? {
            NO_LABEL => None,
            id => Some(id),
        };
        let window = r.bytes(vocab)?.to_vec();
        let row = (0..vocab).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
        counts.push((ContextKey { position, label, window }, row));
    }
    r.finish()?;
    CountModel::from_parts(layout, alpha, dropout, labels, counts)
        .map_err(|e| ContainerError::Malformed { tag: "CFUL".into(), msg: e.to_string() })
}

fn read_codebook(hd: &[u8], en: &[u8], hi: &[u8]) -> Result<(Codebook, Vec<f64>), ContainerError> {
    let mut r = ByteReader::new(hd, "CBHD");
    let (ph, pw, ch, k) = (r.usize()?, r.usize()?, r.usize()?, r.usize()?);
    r.finish()?;
    let shape = PatchShape::new(ph, pw, ch).map_err(|e| r.malformed(&e.to_string()))?;
    let mut r = ByteReader::new(en, "CBEN");
    let n = k.checked_mul(shape.dim()).ok_or_else(|| r.malformed("codebook too large"))?;
    if en.len() != n * 8 {
        return Err(r.malformed(&format!("expected {} bytes, got {}", n * 8, en.len())));
    }
    let flat = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
    let codebook = Codebook::from_flat(shape, flat).map_err(|e| r.malformed(&e.to_string()))?;
    let mut r = ByteReader::new(hi, "CBHI");
    let m = r.usize()?;
    let history = (0..m).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
    r.finish()?;
    Ok((codebook, history))
}

/// Human-readable listing of a container and its decoded payloads.
pub fn dump(c: &Container) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "DCW1 version {} with {} sections", crate::container::VERSION, c.sections.len());
    for s in &c.sections {
        let _ = writeln!(out, "[{}] {} bytes", s.tag_str(), s.payload.len());
    }
    match Artifact::from_container(c) {
        Err(e) => {
            let _ = writeln!(out, "undecodable: {e}");
        }
        Ok((art, config)) => {
            let _ = writeln!(out, "kind: {}", art.kind());
            let _ = writeln!(out, "config:");
            for line in config.lines() {
                let _ = writeln!(out, "  {line}");
            }
            if let Some(spec) = art.world_spec() {
                let _ = writeln!(out, "world: {spec:?}");
            }
            match &art {
                Artifact::CountModel { model, .. } => {
                    let _ = writeln!(out, "alpha: {} dropout_prob: {}", model.alpha(), model.dropout_prob());
                    for (i, l) in model.labels().iter().enumerate() {
                        let _ = writeln!(out, "label {i}: {l}");
                    }
                    for (k, v) in model.counts() {
                        let label = k.label.map_or("-".to_string(), |l| l.to_string());
                        let _ = writeln!(out, "pos {} label {} window {:?} counts {:?}", k.position, label, k.window, v);
                    }
                }
                Artifact::Codebook { codebook, history } => {
                    let s = codebook.shape();
                    let _ = writeln!(out, "patch {}x{}x{} entries {}", s.patch_h, s.patch_w, s.channels, codebook.len());
                    for (j, e) in codebook.entries().enumerate() {
                        let _ = writeln!(out, "entry {j}: {e:?}");
                    }
                    let _ = writeln!(out, "history: {history:?}");
                }
                _ => {}
            }
        }
    }
    out
}

//! Raw little-endian voxel files with a JSON sidecar.
//!
//! A grid stored at `foo.raw` is described by `foo.raw.json`:
//!
//! ```json
//! {"dims": [64, 64, 64], "dtype": "u8", "axis_order": "xyz", "spacing": null, "kind": "mask"}
//! ```
//!
//! `axis_order` names the axes from fastest to slowest varying. Label
//! volumes additionally carry a `codebook` mapping codes to phase names.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::supervoxel::SupervoxelMap;
use crate::volume::{Dims, LabelVolume, SaliencyField, SegmentationMask, Volume};

/// On-disk element type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    U8,
    U16,
    U32,
    F32,
}

impl DType {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "u8" | "uint8" => Ok(DType::U8),
            "u16" | "uint16" => Ok(DType::U16),
            "u32" | "uint32" => Ok(DType::U32),
            "f32" | "float32" => Ok(DType::F32),
            other => Err(Error::Format(format!("unsupported element type `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DType::U8 => "u8",
            DType::U16 => "u16",
            DType::U32 => "u32",
            DType::F32 => "f32",
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::U16 => 2,
            DType::U32 | DType::F32 => 4,
        }
    }
}

/// Contents of the `.json` file stored next to each raw grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub dims: Dims,
    pub dtype: String,
    #[serde(default = "default_axis_order")]
    pub axis_order: String,
    #[serde(default)]
    pub spacing: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub codebook: Option<BTreeMap<String, String>>,
}

fn default_axis_order() -> String {
    "xyz".to_string()
}

impl Sidecar {
    pub fn new(dims: Dims, dtype: DType) -> Self {
        Sidecar {
            dims,
            dtype: dtype.name().to_string(),
            axis_order: default_axis_order(),
            spacing: None,
            kind: None,
            codebook: None,
        }
    }

    fn with_kind(mut self, kind: &str) -> Self {
        self.kind = Some(kind.to_string());
        self
    }

    pub fn element_type(&self) -> Result<DType> {
        DType::parse(&self.dtype)
    }
}

/// `foo.raw` → `foo.raw.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let sc = sidecar_path(path);
    let text = fs::read_to_string(&sc).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => {
            Error::Format(format!("missing sidecar {}", sc.display()))
        }
        _ => Error::Io(e),
    })?;
    let sidecar: Sidecar = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("bad sidecar {}: {e}", sc.display())))?;
    sidecar
        .dims
        .validate()
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok(sidecar)
}

fn write_sidecar(path: &Path, sidecar: &Sidecar) -> Result<()> {
    let text = serde_json::to_string_pretty(sidecar).expect("sidecar serializes");
    fs::write(sidecar_path(path), text)?;
    Ok(())
}

/// Permutation from file order to x-fastest order.
fn axis_permutation(order: &str) -> Result<[usize; 3]> {
    let mut perm = [0usize; 3];
    let chars: Vec<char> = order.to_ascii_lowercase().chars().collect();
    if chars.len() != 3 {
        return Err(Error::Format(format!("bad axis order `{order}`")));
    }
    let mut seen = [false; 3];
    for (slot, c) in chars.iter().enumerate() {
        let axis = match c {
            'x' => 0,
            'y' => 1,
            'z' => 2,
            _ => return Err(Error::Format(format!("bad axis order `{order}`"))),
        };
        if seen[axis] {
            return Err(Error::Format(format!("bad axis order `{order}`")));
        }
        seen[axis] = true;
        perm[slot] = axis;
    }
    Ok(perm)
}

/// Reorders a file-order buffer into x-fastest order.
fn to_xyz<T: Copy>(data: Vec<T>, dims: Dims, order: &str) -> Result<Vec<T>> {
    let perm = axis_permutation(order)?;
    if perm == [0, 1, 2] {
        return Ok(data);
    }
    let ext = dims.as_array();
    let file_ext = [ext[perm[0]], ext[perm[1]], ext[perm[2]]];
    let mut out = Vec::with_capacity(data.len());
    for z in 0..dims.nz {
        for y in 0..dims.ny {
            for x in 0..dims.nx {
                let c = [x, y, z];
                let (a, b, d) = (c[perm[0]], c[perm[1]], c[perm[2]]);
                out.push(data[a + file_ext[0] * (b + file_ext[1] * d)]);
            }
        }
    }
    Ok(out)
}

fn read_raw(path: &Path, sidecar: &Sidecar) -> Result<(DType, Vec<u8>)> {
    let dtype = sidecar.element_type()?;
    let bytes = fs::read(path)?;
    let expected = sidecar.dims.len() * dtype.size();
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "{}: file has {} bytes, dims {} x {} requires {expected}",
            path.display(),
            bytes.len(),
            sidecar.dims,
            dtype.name()
        )));
    }
    Ok((dtype, bytes))
}

fn decode_unit(dtype: DType, bytes: &[u8]) -> Result<Vec<f64>> {
    let out = match dtype {
        DType::U8 => bytes.iter().map(|&b| b as f64 / u8::MAX as f64).collect(),
        DType::U16 => bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]) as f64 / u16::MAX as f64)
            .collect(),
        DType::F32 => {
            let vals: Vec<f64> = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
                return Err(Error::Data(format!("non-finite value at voxel {i}")));
            }
            if let Some(v) = vals.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Data(format!(
                    "f32 intensity {v} outside [0, 1]; float volumes must be pre-normalized"
                )));
            }
            vals
        }
        DType::U32 => {
            return Err(Error::Format(
                "u32 is not a supported intensity type".to_string(),
            ))
        }
    };
    Ok(out)
}

/// Reads a grayscale volume, normalizing integer types by their maximum.
pub fn load_volume(path: &Path) -> Result<Volume> {
    let sidecar = read_sidecar(path)?;
    load_volume_with(path, &sidecar)
}

pub fn load_volume_with(path: &Path, sidecar: &Sidecar) -> Result<Volume> {
    let (dtype, bytes) = read_raw(path, sidecar)?;
    let voxels = to_xyz(decode_unit(dtype, &bytes)?, sidecar.dims, &sidecar.axis_order)?;
    Ok(Volume::new(sidecar.dims, voxels)?.with_spacing(sidecar.spacing))
}

/// Writes a volume quantized to `dtype` (u8, u16 or f32).
pub fn save_volume(v: &Volume, path: &Path, dtype: DType) -> Result<()> {
    let bytes: Vec<u8> = match dtype {
        DType::U8 => v
            .voxels()
            .iter()
            .map(|&x| (x * u8::MAX as f64).round() as u8)
            .collect(),
        DType::U16 => v
            .voxels()
            .iter()
            .flat_map(|&x| ((x * u16::MAX as f64).round() as u16).to_le_bytes())
            .collect(),
        DType::F32 => v
            .voxels()
            .iter()
            .flat_map(|&x| (x as f32).to_le_bytes())
            .collect(),
        DType::U32 => {
            return Err(Error::Format(
                "u32 is not a supported intensity type".to_string(),
            ))
        }
    };
    fs::write(path, bytes)?;
    let mut sc = Sidecar::new(v.dims(), dtype).with_kind("volume");
    sc.spacing = v.spacing();
    write_sidecar(path, &sc)
}

/// Writes a mask as u8 (0 = pore, 1 = solid).
pub fn save_mask(m: &SegmentationMask, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = m.solid().iter().map(|&s| s as u8).collect();
    fs::write(path, bytes)?;
    write_sidecar(path, &Sidecar::new(m.dims(), DType::U8).with_kind("mask"))
}

pub fn load_mask(path: &Path) -> Result<SegmentationMask> {
    let sidecar = read_sidecar(path)?;
    let (dtype, bytes) = read_raw(path, &sidecar)?;
    if dtype != DType::U8 {
        return Err(Error::Format(format!(
            "masks must be u8, sidecar declares {}",
            dtype.name()
        )));
    }
    let solid = bytes
        .iter()
        .enumerate()
        .map(|(i, &b)| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::Data(format!("mask byte {other} at voxel {i}"))),
        })
        .collect::<Result<Vec<bool>>>()?;
    SegmentationMask::new(sidecar.dims, to_xyz(solid, sidecar.dims, &sidecar.axis_order)?)
}

/// Writes a per-voxel saliency field as f32.
pub fn save_saliency(f: &SaliencyField, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = f
        .values()
        .iter()
        .flat_map(|&x| (x as f32).to_le_bytes())
        .collect();
    fs::write(path, bytes)?;
    write_sidecar(path, &Sidecar::new(f.dims(), DType::F32).with_kind("saliency"))
}

pub fn load_saliency(path: &Path) -> Result<SaliencyField> {
    let sidecar = read_sidecar(path)?;
    let (dtype, bytes) = read_raw(path, &sidecar)?;
    let values = to_xyz(decode_unit(dtype, &bytes)?, sidecar.dims, &sidecar.axis_order)?;
    SaliencyField::new(sidecar.dims, values)
}

/// Writes a label volume as u8 with its codebook in the sidecar.
pub fn save_labels(l: &LabelVolume, path: &Path) -> Result<()> {
    fs::write(path, l.labels())?;
    let mut sc = Sidecar::new(l.dims(), DType::U8).with_kind("labels");
    sc.codebook = Some(
        l.codebook()
            .iter()
            .map(|(c, n)| (c.to_string(), n.clone()))
            .collect(),
    );
    write_sidecar(path, &sc)
}

pub fn load_labels(path: &Path) -> Result<LabelVolume> {
    let sidecar = read_sidecar(path)?;
    let (dtype, bytes) = read_raw(path, &sidecar)?;
    let labels: Vec<u8> = match dtype {
        DType::U8 => bytes,
        DType::U16 => bytes
            .chunks_exact(2)
            .map(|c| {
                let v = u16::from_le_bytes([c[0], c[1]]);
                u8::try_from(v).map_err(|_| Error::Data(format!("label code {v} exceeds 255")))
            })
            .collect::<Result<_>>()?,
        other => {
            return Err(Error::Format(format!(
                "label volumes must be u8 or u16, got {}",
                other.name()
            )))
        }
    };
    let labels = to_xyz(labels, sidecar.dims, &sidecar.axis_order)?;
    let codebook = match &sidecar.codebook {
        Some(cb) => cb
            .iter()
            .map(|(k, v)| {
                k.parse::<u8>()
                    .map(|c| (c, v.clone()))
                    .map_err(|_| Error::Format(format!("bad codebook key `{k}`")))
            })
            .collect::<Result<BTreeMap<u8, String>>>()?,
        // Without a codebook every code present is its own phase.
        None => labels
            .iter()
            .map(|&c| (c, format!("phase{c}")))
            .collect(),
    };
    LabelVolume::new(sidecar.dims, labels, codebook)
}

/// Debug export of supervoxel ids as u32.
pub fn save_supervoxels(m: &SupervoxelMap, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = m
        .assignment()
        .iter()
        .flat_map(|&id| id.to_le_bytes())
        .collect();
    fs::write(path, bytes)?;
    write_sidecar(path, &Sidecar::new(m.dims(), DType::U32).with_kind("supervoxels"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw(dir: &Path, name: &str, bytes: &[u8], sidecar: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, bytes).unwrap();
        fs::write(sidecar_path(&p), sidecar).unwrap();
        p
    }

    #[test]
    fn u8_max_and_zero() {
        let dir = tempfile::tempdir().unwrap();
        let sc = r#"{"dims":[2,2,2],"dtype":"u8","axis_order":"xyz"}"#;
        let p = write_raw(dir.path(), "a.raw", &[255; 8], sc);
        assert!(load_volume(&p).unwrap().voxels().iter().all(|&v| v == 1.0));
        let p = write_raw(dir.path(), "b.raw", &[0; 8], sc);
        assert!(load_volume(&p).unwrap().voxels().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn u16_normalizes_by_type_max() {
        let dir = tempfile::tempdir().unwrap();
        let bytes: Vec<u8> = 32768u16.to_le_bytes().to_vec();
        let p = write_raw(
            dir.path(),
            "c.raw",
            &bytes,
            r#"{"dims":[1,1,1],"dtype":"u16","axis_order":"xyz"}"#,
        );
        let v = load_volume(&p).unwrap();
        assert!((v.voxels()[0] - 32768.0 / 65535.0).abs() < 1e-15);
        assert!((v.voxels()[0] - 0.50001).abs() < 1e-5);
    }

    #[test]
    fn format_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_raw(
            dir.path(),
            "short.raw",
            &[0; 7],
            r#"{"dims":[2,2,2],"dtype":"u8"}"#,
        );
        assert!(matches!(load_volume(&p), Err(Error::Format(_))));
        let p = write_raw(
            dir.path(),
            "f64.raw",
            &[0; 64],
            r#"{"dims":[2,2,2],"dtype":"f64"}"#,
        );
        assert!(matches!(load_volume(&p), Err(Error::Format(_))));
        let p = dir.path().join("nosidecar.raw");
        fs::write(&p, [0u8; 8]).unwrap();
        assert!(matches!(load_volume(&p), Err(Error::Format(_))));
    }

    #[test]
    fn f32_must_be_finite_and_unit() {
        let dir = tempfile::tempdir().unwrap();
        let sc = r#"{"dims":[2,1,1],"dtype":"f32"}"#;
        let bytes: Vec<u8> = [0.5f32, f32::NAN].iter().flat_map(|v| v.to_le_bytes()).collect();
        let p = write_raw(dir.path(), "nan.raw", &bytes, sc);
        assert!(matches!(load_volume(&p), Err(Error::Data(_))));
        let bytes: Vec<u8> = [0.5f32, 0.25].iter().flat_map(|v| v.to_le_bytes()).collect();
        let p = write_raw(dir.path(), "ok.raw", &bytes, sc);
        assert_eq!(load_volume(&p).unwrap().voxels(), &[0.5, 0.25]);
    }

    #[test]
    fn zyx_order_is_transposed() {
        let dir = tempfile::tempdir().unwrap();
        // dims (nx=2, ny=1, nz=3); z fastest in the file.
        let file: Vec<u8> = vec![0, 10, 20, 100, 110, 120];
        let p = write_raw(
            dir.path(),
            "t.raw",
            &file,
            r#"{"dims":[2,1,3],"dtype":"u8","axis_order":"zyx"}"#,
        );
        let v = load_volume(&p).unwrap();
        let got: Vec<u8> = v.voxels().iter().map(|x| (x * 255.0).round() as u8).collect();
        // x-fastest: (x0,z0),(x1,z0),(x0,z1),(x1,z1),...
        assert_eq!(got, vec![0, 100, 10, 110, 20, 120]);
    }

    #[test]
    fn mask_bytes_and_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let m = SegmentationMask::new(Dims::new(2, 1, 1), vec![false, true]).unwrap();
        let p = dir.path().join("m.raw");
        save_mask(&m, &p).unwrap();
        assert_eq!(fs::read(&p).unwrap(), vec![0, 1]);
        let sc: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(sidecar_path(&p)).unwrap()).unwrap();
        assert_eq!(sc["kind"], "mask");
        assert_eq!(sc["dims"], serde_json::json!([2, 1, 1]));
        assert_eq!(load_mask(&p).unwrap(), m);

        let solid = SegmentationMask::filled(Dims::cube(3), true).unwrap();
        save_mask(&solid, &p).unwrap();
        assert!(fs::read(&p).unwrap().iter().all(|&b| b == 1));
    }

    #[test]
    fn labels_roundtrip_with_codebook() {
        let dir = tempfile::tempdir().unwrap();
        let cb: BTreeMap<u8, String> = [(0, "gas".to_string()), (3, "solid".to_string())].into();
        let l = LabelVolume::new(Dims::new(3, 1, 1), vec![0, 3, 0], cb).unwrap();
        let p = dir.path().join("l.raw");
        save_labels(&l, &p).unwrap();
        assert_eq!(load_labels(&p).unwrap(), l);
    }
}

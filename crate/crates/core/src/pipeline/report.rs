//! Model files, trajectories and JSON output.
//!
//! Floats are written in scientific notation with 17 significant digits,
//! which is enough for every `f64` to survive a write/read cycle exactly.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use super::Method;
use crate::error::{check_dim, Error, Result};
use crate::expfam::mvn::MvnFamily;
use crate::linalg::Structure;
use crate::mixture::MixtureModel;
use crate::model::Hmog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub k: usize,
}

/// Natural parameters in minimal coordinates. Symmetric blocks list the
/// free entries of the structure: one value (isotropic), the diagonal, or
/// the lower triangle row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub theta_x_mu: Vec<f64>,
    pub theta_xx: Vec<f64>,
    pub theta_y: Vec<f64>,
    pub theta_z: Vec<f64>,
    /// `n` rows of `m` entries.
    pub theta_xy: Vec<Vec<f64>>,
    /// One row per component `2..=k`, in the layout of `theta_y`.
    pub theta_yz: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub method: Method,
    pub dims: Dims,
    pub params: Params,
    pub meta: Meta,
}

impl ModelFile {
    pub fn from_hmog(method: Method, model: &Hmog, seed: u64) -> Self {
        let (n, m, k) = (model.obs_dim(), model.lat_dim(), model.num_components());
        let obs = model.obs.coords();
        let y = &model.mixture.lat;
        ModelFile {
            method,
            dims: Dims { n, m, k },
            params: Params {
                theta_x_mu: obs.rows(0, n).iter().copied().collect(),
                theta_xx: obs.rows(n, obs.len() - n).iter().copied().collect(),
                theta_y: y.coords().iter().copied().collect(),
                theta_z: model.mixture.cat.iter().copied().collect(),
                theta_xy: model.obs_interaction.row_iter().map(|r| r.iter().copied().collect()).collect(),
                theta_yz: model.mixture.interaction.iter().map(|s| s.coords().iter().copied().collect()).collect(),
            },
            meta: Meta {
                seed,
                version: env!("CARGO_PKG_VERSION").to_string(),
            },
        }
    }

    /// Rebuilds the HMoG; the observable structure follows from the method.
    pub fn to_hmog(&self) -> Result<Hmog> {
        let Dims { n, m, k } = self.dims;
        if n == 0 || m == 0 || k == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        let p = &self.params;
        let obs_family = MvnFamily::new(n, self.method.structure());
        let lat_family = MvnFamily::new(m, Structure::Full);
        check_dim("theta_x_mu", n, p.theta_x_mu.len())?;
        check_dim("theta_xx", obs_family.structure.coord_len(n), p.theta_xx.len())?;
        check_dim("theta_y", lat_family.coord_len(), p.theta_y.len())?;
        check_dim("theta_z", k - 1, p.theta_z.len())?;
        check_dim("theta_xy rows", n, p.theta_xy.len())?;
        check_dim("theta_yz rows", k - 1, p.theta_yz.len())?;
        for row in &p.theta_xy {
            check_dim("theta_xy columns", m, row.len())?;
        }
        for row in &p.theta_yz {
            check_dim("theta_yz columns", lat_family.coord_len(), row.len())?;
        }
        let all = p
            .theta_x_mu
            .iter()
            .chain(&p.theta_xx)
            .chain(&p.theta_y)
            .chain(&p.theta_z)
            .chain(p.theta_xy.iter().flatten())
            .chain(p.theta_yz.iter().flatten());
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::domain("model file", "non-finite parameter"));
        }
        let obs_coords: Vec<f64> = p.theta_x_mu.iter().chain(&p.theta_xx).copied().collect();
        let obs = obs_family.natural_from_coords(&obs_coords);
        let interaction = DMatrix::from_fn(n, m, |i, j| p.theta_xy[i][j]);
        let mixture = MixtureModel::new(
            lat_family.natural_from_coords(&p.theta_y),
            DVector::from_column_slice(&p.theta_z),
            p.theta_yz.iter().map(|c| lat_family.natural_from_coords(c)).collect(),
        )?;
        let model = Hmog::new(obs, interaction, mixture)?;
        model.validate()?;
        Ok(model)
    }
}

/// Pretty-printed JSON with round-trip float formatting.
struct ExactFloats(PrettyFormatter<'static>);

impl Formatter for ExactFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{value:.8e}")
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes `value` as pretty JSON with 17-significant-digit floats.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ExactFloats(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    File::create(path.as_ref())?.write_all(to_json_string(value)?.as_bytes())?;
    Ok(())
}

pub fn write_model_json(model: &ModelFile, path: impl AsRef<Path>) -> Result<()> {
    write_json(model, path)
}

pub fn read_model_json(path: impl AsRef<Path>) -> Result<ModelFile> {
    let mut text = String::new();
    File::open(path.as_ref())?.read_to_string(&mut text)?;
    Ok(serde_json::from_str(&text)?)
}

/// `iteration,log_likelihood` rows, iterations counted from 1.
pub fn trajectory_csv(trajectory: &[f64]) -> String {
    let mut out = String::from("iteration,log_likelihood\n");
    for (i, v) in trajectory.iter().enumerate() {
        out.push_str(&format!("{},{v}\n", i + 1));
    }
    out
}

pub fn write_trajectory_csv(trajectory: &[f64], path: impl AsRef<Path>) -> Result<()> {
    File::create(path.as_ref())?.write_all(trajectory_csv(trajectory).as_bytes())?;
    Ok(())
}

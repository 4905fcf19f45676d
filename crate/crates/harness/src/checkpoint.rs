//! Binary checkpoints.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic    8 bytes  "NPNSCKPT"
//! version  u32      1
//! M        u64
//! params   f64 ν, f64 D, f64 κ, u32 N, f64 γ, f64 t
//! u.x, u.y, c₁, c₂: M² (re, im) f64 pairs each, row-major in k
//! ```

use std::path::Path;

use npns_core::{NoiseSpec, SpectralScalar, SpectralVector, State, SystemParams};
use num_complex::Complex64;

use crate::error::{HarnessError, Result};

pub const MAGIC: &[u8; 8] = b"NPNSCKPT";
pub const VERSION: u32 = 1;
const HEADER: usize = 8 + 4 + 8 + 8 * 3 + 4 + 8 * 2;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: SystemParams,
    pub t: f64,
    pub state: State,
}

pub fn encode(params: &SystemParams, t: f64, state: &State) -> Vec<u8> {
    let m = state.size();
    let mut out = Vec::with_capacity(HEADER + 4 * m * m * 16);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m as u64).to_le_bytes());
    for v in [params.viscosity, params.diffusivity, params.noise.intensity] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&params.noise.shell.to_le_bytes());
    out.extend_from_slice(&params.noise.profile_exponent.to_le_bytes());
    out.extend_from_slice(&t.to_le_bytes());
    let u = state.velocity();
    for f in [&u.x, &u.y, state.c1(), state.c2()] {
        for z in f.coefficients() {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.at + N;
        let chunk = self
            .bytes
            .get(self.at..end)
            .ok_or_else(|| HarnessError::Config("checkpoint is truncated".into()))?;
        self.at = end;
        Ok(chunk.try_into().expect("slice of length N"))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, at: 0 };
    if &r.take::<8>()? != MAGIC {
        return Err(HarnessError::Config("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(HarnessError::Config(format!(
            "checkpoint version {version} is not supported (expected {VERSION})"
        )));
    }
    let m = usize::try_from(r.u64()?).map_err(|_| HarnessError::Config("resolution overflows".into()))?;
    let (nu, d, kappa) = (r.f64()?, r.f64()?, r.f64()?);
    let shell = r.u32()?;
    let gamma = r.f64()?;
    let t = r.f64()?;
    let expected = m
        .checked_mul(m)
        .and_then(|n| n.checked_mul(64))
        .and_then(|n| n.checked_add(HEADER))
        .ok_or_else(|| HarnessError::Config("resolution overflows".into()))?;
    if bytes.len() != expected {
        return Err(HarnessError::Config(format!(
            "checkpoint holds {} bytes, expected {expected} for M = {m}",
            bytes.len()
        )));
    }
    let mut fields = Vec::with_capacity(4);
    for _ in 0..4 {
        let coeffs = (0..m * m)
            .map(|_| Ok(Complex64::new(r.f64()?, r.f64()?)))
            .collect::<Result<Vec<_>>>()?;
        fields.push(SpectralScalar::from_coefficients(m, coeffs)?);
    }
    let c2 = fields.pop().expect("four fields");
    let c1 = fields.pop().expect("four fields");
    let uy = fields.pop().expect("four fields");
    let ux = fields.pop().expect("four fields");
    let params = SystemParams::new(nu, d, NoiseSpec::new(kappa, shell, gamma)?)?;
    let state = State::new(SpectralVector::new(ux, uy), c1, c2)?;
    Ok(Checkpoint { params, t, state })
}

pub fn save(path: &Path, params: &SystemParams, t: f64, state: &State) -> Result<()> {
    std::fs::write(path, encode(params, t, state))
        .map_err(|e| HarnessError::io(format!("writing {}", path.display()), e))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| HarnessError::io(format!("reading {}", path.display()), e))?;
    decode(&bytes)
}

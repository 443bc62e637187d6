//! Versioned little-endian binary model format.
//!
//! ```text
//! magic "PFNB" | version u16 | feature kind u8 | alpha f64
//! | alphabet size u32 | vocabulary fingerprint u64 | class count u32
//! | per class: label (u32 length + UTF-8) | example count u64 | log prior f64
//!              | alphabet-size log likelihoods f64
//! | checksum: first 8 bytes of SHA-256 over everything before it
//! ```

use sha2::{Digest, Sha256};

use super::{BayesError, FeatureKind, NaiveBayesModel};

pub const MAGIC: &[u8; 4] = b"PFNB";
pub const FORMAT_VERSION: u16 = 1;

fn checksum(bytes: &[u8]) -> [u8; 8] {
    let digest = Sha256::digest(bytes);
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    out
}

pub fn save(model: &NaiveBayesModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(match model.feature_kind {
        FeatureKind::TokenCounts => 0,
        FeatureKind::PosProfile => 1,
    });
    out.extend_from_slice(&model.alpha.to_le_bytes());
    out.extend_from_slice(&(model.vocabulary_size as u32).to_le_bytes());
    out.extend_from_slice(&model.vocabulary_fingerprint.to_le_bytes());
    out.extend_from_slice(&(model.class_labels.len() as u32).to_le_bytes());
    for k in 0..model.class_labels.len() {
        let label = model.class_labels[k].as_bytes();
        out.extend_from_slice(&(label.len() as u32).to_le_bytes());
        out.extend_from_slice(label);
        out.extend_from_slice(&model.class_counts[k].to_le_bytes());
        out.extend_from_slice(&model.log_priors[k].to_le_bytes());
        for v in &model.log_likelihoods[k] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let sum = checksum(&out);
    out.extend_from_slice(&sum);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8], BayesError> {
        let end = self
            .offset
            .checked_add(n)
            .filter(|&end| end <= self.bytes.len())
            .ok_or(BayesError::Truncated {
                offset: self.offset,
                field,
            })?;
        let slice = &self.bytes[self.offset..end];
        self.offset = end;
        Ok(slice)
    }

    fn array<const N: usize>(&mut self, field: &'static str) -> Result<[u8; N], BayesError> {
        Ok(self.take(N, field)?.try_into().expect("length checked"))
    }

    fn u16(&mut self, field: &'static str) -> Result<u16, BayesError> {
        self.array(field).map(u16::from_le_bytes)
    }

    fn u32(&mut self, field: &'static str) -> Result<u32, BayesError> {
        self.array(field).map(u32::from_le_bytes)
    }

    fn u64(&mut self, field: &'static str) -> Result<u64, BayesError> {
        self.array(field).map(u64::from_le_bytes)
    }

    fn f64(&mut self, field: &'static str) -> Result<f64, BayesError> {
        self.array(field).map(f64::from_le_bytes)
    }

    fn corrupt(&self, at: usize, reason: impl Into<String>) -> BayesError {
        BayesError::Corrupt {
            offset: at,
            reason: reason.into(),
        }
    }
}

pub fn load(bytes: &[u8]) -> Result<NaiveBayesModel, BayesError> {
    let mut r = Reader { bytes, offset: 0 };
    if r.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(BayesError::BadMagic);
    }
    let at = r.offset;
    let version = r.u16("version")?;
    if version != FORMAT_VERSION {
        return Err(BayesError::UnsupportedVersion {
            found: version,
            expected: FORMAT_VERSION,
            offset: at,
        });
    }
    let at = r.offset;
    let feature_kind = match r.take(1, "feature kind")?[0] {
        0 => FeatureKind::TokenCounts,
        1 => FeatureKind::PosProfile,
        other => return Err(r.corrupt(at, format!("unknown feature kind tag {other}"))),
    };
    let at = r.offset;
    let alpha = r.f64("alpha")?;
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(r.corrupt(at, format!("alpha {alpha} is not positive")));
    }
    let vocabulary_size = r.u32("alphabet size")? as usize;
    let vocabulary_fingerprint = r.u64("vocabulary fingerprint")?;
    let classes = r.u32("class count")? as usize;

    let mut class_labels = Vec::new();
    let mut class_counts = Vec::new();
    let mut log_priors = Vec::new();
    let mut log_likelihoods = Vec::new();
    for _ in 0..classes {
        let len = r.u32("label length")? as usize;
        let at = r.offset;
        let label = std::str::from_utf8(r.take(len, "label")?)
            .map_err(|e| r.corrupt(at, format!("label is not UTF-8: {e}")))?;
        class_labels.push(label.to_string());
        class_counts.push(r.u64("class count")?);
        log_priors.push(r.f64("log prior")?);
        let mut table = Vec::with_capacity(vocabulary_size.min(1 << 20));
        for _ in 0..vocabulary_size {
            table.push(r.f64("log likelihood")?);
        }
        log_likelihoods.push(table);
    }

    let body_end = r.offset;
    let stored = r.array::<8>("checksum")?;
    if stored != checksum(&bytes[..body_end]) {
        return Err(r.corrupt(body_end, "checksum mismatch"));
    }
    if r.offset != bytes.len() {
        return Err(r.corrupt(r.offset, "trailing bytes after checksum"));
    }

    Ok(NaiveBayesModel {
        class_labels,
        class_counts,
        log_priors,
        log_likelihoods,
        alpha,
        vocabulary_size,
        vocabulary_fingerprint,
        feature_kind,
    })
}

//! On-disk cache for Ulam matrices and density ladders.
//!
//! Each entry is one file: `LSVC`, a format version, an entry kind, the
//! 32-byte key, the payload length and payload (little endian), then the
//! SHA-256 of everything before it. A file whose checksum, header or key
//! does not match is reported as [`Error::CacheCorruption`].

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::maps::ParameterSchedule;
use crate::mesh::{CellFunction, Density, Mesh};
use crate::transfer::{ulam_matrix, PushMethod, Pusher, UlamCache, UlamOperator};

const MAGIC: &[u8; 4] = b"LSVC";
const VERSION: u32 = 1;
const KEY_LEN: usize = 32;
const HEADER_LEN: usize = 4 + 4 + 1 + KEY_LEN + 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
enum EntryKind {
    Ulam = 1,
    Ladder = 2,
}

/// Key of an entry: SHA-256 over a tag, the exponent sequence and the mesh.
pub fn cache_key(tag: &str, alphas: &[f64], mesh: &Mesh) -> [u8; KEY_LEN] {
    let mut h = Sha256::new();
    h.update(tag.as_bytes());
    h.update((alphas.len() as u64).to_le_bytes());
    for a in alphas {
        h.update(a.to_bits().to_le_bytes());
    }
    h.update((mesh.bounds().len() as u64).to_le_bytes());
    for b in mesh.bounds() {
        h.update(b.to_bits().to_le_bytes());
    }
    h.finalize().into()
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn encode(kind: EntryKind, key: &[u8; KEY_LEN], payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + 32);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(kind as u8);
    out.extend_from_slice(key);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

fn decode<'a>(bytes: &'a [u8], kind: EntryKind, key: &[u8; KEY_LEN]) -> Result<&'a [u8]> {
    let corrupt = |why: &str| Error::CacheCorruption(why.to_string());
    if bytes.len() < HEADER_LEN + 32 {
        return Err(corrupt("truncated entry"));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(corrupt("checksum mismatch"));
    }
    if &body[..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    if body[4..8] != VERSION.to_le_bytes() {
        return Err(corrupt("unsupported version"));
    }
    if body[8] != kind as u8 {
        return Err(corrupt("unexpected entry kind"));
    }
    if &body[9..9 + KEY_LEN] != key {
        return Err(corrupt("key mismatch"));
    }
    let len = u64::from_le_bytes(body[9 + KEY_LEN..HEADER_LEN].try_into().expect("8 bytes")) as usize;
    let payload = &body[HEADER_LEN..];
    if payload.len() != len {
        return Err(corrupt("payload length mismatch"));
    }
    Ok(payload)
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn take(&mut self) -> Result<[u8; 8]> {
        if self.0.len() < 8 {
            return Err(Error::CacheCorruption("payload ends early".into()));
        }
        let (head, rest) = self.0.split_at(8);
        self.0 = rest;
        Ok(head.try_into().expect("8 bytes"))
    }

    fn u64(&mut self) -> Result<u64> {
        self.take().map(u64::from_le_bytes)
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::CacheCorruption("length overflows usize".into()))
    }

    fn f64(&mut self) -> Result<f64> {
        self.take().map(f64::from_le_bytes)
    }

    fn finish(self) -> Result<()> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(Error::CacheCorruption("trailing payload bytes".into()))
        }
    }
}

/// A directory of cache entries.
#[derive(Clone, Debug)]
pub struct DiskCache {
    dir: PathBuf,
}

impl DiskCache {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(DiskCache {
            dir: dir.as_ref().to_path_buf(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, kind: EntryKind, key: &[u8; KEY_LEN]) -> PathBuf {
        let prefix = match kind {
            EntryKind::Ulam => "ulam",
            EntryKind::Ladder => "ladder",
        };
        self.dir.join(format!("{prefix}-{}.bin", hex(key)))
    }

    fn load(&self, kind: EntryKind, key: &[u8; KEY_LEN]) -> Result<Option<Vec<u8>>> {
        let path = self.path(kind, key);
        match fs::read(&path) {
            Ok(bytes) => decode(&bytes, kind, key).map(|p| Some(p.to_vec())),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn store(&self, kind: EntryKind, key: &[u8; KEY_LEN], payload: &[u8]) -> Result<()> {
        let path = self.path(kind, key);
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, encode(kind, key, payload))?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    /// The Ulam matrix of `T_alpha` on `mesh`, built and stored on a miss.
    pub fn ulam(&self, alpha: f64, mesh: &Arc<Mesh>) -> Result<UlamOperator> {
        let key = cache_key("ulam", &[alpha], mesh);
        if let Some(payload) = self.load(EntryKind::Ulam, &key)? {
            let mut r = Reader(&payload);
            let rows = r.usize()?;
            let nnz = r.usize()?;
            let row_ptr = (0..=rows).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
            let cols = (0..nnz).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
            let weights = (0..nnz).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            r.finish()?;
            return UlamOperator::from_raw(alpha, mesh, row_ptr, cols, weights)
                .map_err(|e| Error::CacheCorruption(format!("stored matrix rejected: {e}")));
        }
        let op = ulam_matrix(alpha, mesh)?;
        let (row_ptr, cols, weights) = op.to_raw();
        let mut w = Writer::default();
        w.u64((row_ptr.len() - 1) as u64);
        w.u64(cols.len() as u64);
        row_ptr.iter().chain(&cols).for_each(|&v| w.u64(v as u64));
        weights.iter().for_each(|&v| w.f64(v));
        self.store(EntryKind::Ulam, &key, &w.0)?;
        Ok(op)
    }

    /// `(Pi_0(1), ..., Pi_{n-1}(1))`, identical to
    /// [`crate::thresholds::density_ladder`], with matrices and the ladder
    /// itself read from and written to the cache.
    pub fn density_ladder(
        &self,
        schedule: &ParameterSchedule,
        mesh: &Arc<Mesh>,
        n: usize,
        method: PushMethod,
    ) -> Result<Vec<Density>> {
        if n == 0 {
            return Ok(Vec::new());
        }
        let alphas = schedule.alphas(n - 1)?;
        let ulam = method.uses_ulam(schedule);
        let tag = if ulam { "ladder-ulam" } else { "ladder-exact" };
        let key = cache_key(tag, &alphas, mesh);
        if let Some(payload) = self.load(EntryKind::Ladder, &key)? {
            let mut r = Reader(&payload);
            let count = r.usize()?;
            let cells = r.usize()?;
            if count != n || cells != mesh.len() {
                return Err(Error::CacheCorruption("ladder shape does not match its key".into()));
            }
            let mut ladder = Vec::with_capacity(n);
            for _ in 0..n {
                let values = (0..cells).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
                let density = CellFunction::new(mesh.clone(), values).and_then(Density::new);
                ladder.push(density.map_err(|e| Error::CacheCorruption(format!("stored density rejected: {e}")))?);
            }
            r.finish()?;
            return Ok(ladder);
        }

        let mut matrices = UlamCache::new();
        if ulam {
            let mut seen = std::collections::HashSet::new();
            for &a in &alphas {
                if seen.insert(a.to_bits()) {
                    matrices.insert(self.ulam(a, mesh)?);
                }
            }
        }
        let f0 = Density::uniform(mesh.clone());
        let mut pusher = Pusher::new(schedule, f0.as_cells().clone(), method).with_cache(matrices);
        let mut ladder = vec![f0];
        for _ in 1..n {
            ladder.push(Density::from_pushforward(pusher.advance()?.clone())?);
        }

        let mut w = Writer::default();
        w.u64(n as u64);
        w.u64(mesh.len() as u64);
        for d in &ladder {
            d.values().iter().for_each(|&v| w.f64(v));
        }
        self.store(EntryKind::Ladder, &key, &w.0)?;
        Ok(ladder)
    }
}

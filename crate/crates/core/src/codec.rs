//! Versioned binary container for a built index.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    b"MMIX"
//! version  u32
//! count    u32                      number of sections
//! section  tag [u8; 4], len u64, payload[len]   (repeated)
//! ```
//!
//! Sections appear in this order:
//!
//! * `META` JSON: schema, normalization stats, source ids, pivots, engine config
//! * `GTRE` bincode: the global tree
//! * per partition, `PART` bincode `(pid, present, ids, objects, kinds, hidden)`,
//!   followed (when present) by one section per space tagged `IRTR`, `IMVP`
//!   or `IINV` holding that space's local index.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetSchema;
use crate::engine::{EngineConfig, IndexState};
use crate::error::{Error, Result};
use crate::global::{GlobalTree, PivotSet};
use crate::local::{HiddenDim, IndexForest, SpaceIndex};
use crate::metric::{MetricKind, MultiMetricObject, NormalizationStats};

pub const MAGIC: &[u8; 4] = b"MMIX";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Meta {
    schema: DatasetSchema,
    stats: NormalizationStats,
    source_ids: BTreeMap<u64, u64>,
    pivots: PivotSet,
    config: EngineConfig,
}

type PartHeader = (u64, bool, Vec<u64>, Vec<MultiMetricObject>, Vec<MetricKind>, Vec<HiddenDim>);

fn push_section(out: &mut Vec<u8>, tag: &[u8; 4], payload: &[u8]) {
    out.extend_from_slice(tag);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
}

pub fn encode_index(state: &IndexState) -> Result<Vec<u8>> {
    let mut body = Vec::new();
    let mut count = 0u32;
    let meta = Meta {
        schema: state.schema.clone(),
        stats: state.stats.clone(),
        source_ids: state.source_ids.clone(),
        pivots: state.pivots.clone(),
        config: state.config,
    };
    push_section(&mut body, b"META", &serde_json::to_vec(&meta)?);
    push_section(&mut body, b"GTRE", &bincode::serialize(&state.tree)?);
    count += 2;
    for (pid, forest) in state.forests.iter().enumerate() {
        let header: PartHeader = match forest {
            Some(f) => (pid as u64, true, f.ids.clone(), f.objects.clone(), f.kinds.clone(), f.hidden.clone()),
            None => (pid as u64, false, Vec::new(), Vec::new(), Vec::new(), Vec::new()),
        };
        push_section(&mut body, b"PART", &bincode::serialize(&header)?);
        count += 1;
        for idx in forest.iter().flat_map(|f| &f.indexes) {
            let (tag, payload) = match idx {
                SpaceIndex::RTree(i) => (b"IRTR", bincode::serialize(i)?),
                SpaceIndex::Mvp(i) => (b"IMVP", bincode::serialize(i)?),
                SpaceIndex::Inverted(i) => (b"IINV", bincode::serialize(i)?),
            };
            push_section(&mut body, tag, &payload);
            count += 1;
        }
    }
    let mut out = Vec::with_capacity(body.len() + 12);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Corrupt(format!("truncated at byte {}", self.at)))?;
        let s = &self.buf[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn section(&mut self) -> Result<([u8; 4], &'a [u8])> {
        let tag: [u8; 4] = self.take(4)?.try_into().expect("4 bytes");
        let len = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        let len = usize::try_from(len).map_err(|_| Error::Corrupt("section length overflows".into()))?;
        Ok((tag, self.take(len)?))
    }

    fn expect(&mut self, want: &[u8; 4]) -> Result<&'a [u8]> {
        let (tag, payload) = self.section()?;
        if &tag != want {
            return Err(Error::Corrupt(format!(
                "expected section {}, found {}",
                String::from_utf8_lossy(want),
                String::from_utf8_lossy(&tag)
            )));
        }
        Ok(payload)
    }
}

pub fn decode_index(buf: &[u8]) -> Result<IndexState> {
    let mut r = Reader { buf, at: 0 };
    if r.take(4).ok() != Some(MAGIC.as_slice()) {
        return Err(Error::Corrupt("bad magic bytes".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Corrupt(format!("unsupported version {version}, expected {VERSION}")));
    }
    let count = r.u32()? as usize;
    let meta: Meta = serde_json::from_slice(r.expect(b"META")?)?;
    let tree: GlobalTree = bincode::deserialize(r.expect(b"GTRE")?)?;
    let mut seen = 2;
    let mut forests = Vec::with_capacity(tree.partition_count());
    while seen < count {
        let (pid, present, ids, objects, kinds, hidden): PartHeader = bincode::deserialize(r.expect(b"PART")?)?;
        seen += 1;
        if pid as usize != forests.len() {
            return Err(Error::Corrupt(format!("partition {pid} out of order")));
        }
        if !present {
            forests.push(None);
            continue;
        }
        let mut indexes = Vec::with_capacity(kinds.len());
        for _ in 0..kinds.len() {
            let (tag, payload) = r.section()?;
            seen += 1;
            indexes.push(match &tag {
                b"IRTR" => SpaceIndex::RTree(bincode::deserialize(payload)?),
                b"IMVP" => SpaceIndex::Mvp(bincode::deserialize(payload)?),
                b"IINV" => SpaceIndex::Inverted(bincode::deserialize(payload)?),
                other => return Err(Error::Corrupt(format!("unknown index tag {}", String::from_utf8_lossy(other)))),
            });
        }
        forests.push(Some(IndexForest { ids, objects, kinds, hidden, indexes }));
    }
    if seen != count || r.at != buf.len() {
        return Err(Error::Corrupt("section count does not match contents".into()));
    }
    if forests.len() != tree.partition_count() {
        return Err(Error::Corrupt(format!(
            "{} partition sections for {} partitions",
            forests.len(),
            tree.partition_count()
        )));
    }
    let mut tree = tree;
    tree.rebuild_locator();
    Ok(IndexState {
        schema: meta.schema,
        stats: meta.stats,
        source_ids: meta.source_ids,
        pivots: meta.pivots,
        tree,
        forests,
        config: meta.config,
    })
}

pub fn write_index(path: impl AsRef<Path>, state: &IndexState) -> Result<()> {
    fs::write(path, encode_index(state)?)?;
    Ok(())
}

pub fn read_index(path: impl AsRef<Path>) -> Result<IndexState> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::IndexNotBuilt(format!("{} does not exist; run `build` first", path.display())),
        _ => Error::Io(e),
    })?;
    decode_index(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Engine, EngineConfig, KnnQuery};
    use crate::metric::WeightVector;
    use crate::synth::{self, SynthConfig};

    #[test]
    fn roundtrip_preserves_answers() {
        let ds = synth::uniform(&SynthConfig { n: 400, sample_pairs: 5000, ..SynthConfig::default() }).unwrap();
        let e = Engine::build(&ds, EngineConfig { leaf_capacity: 40, ..EngineConfig::default() }).unwrap();
        let bytes = encode_index(e.state()).unwrap();
        assert_eq!(&bytes[..4], MAGIC);
        let back = Engine::from_state(decode_index(&bytes).unwrap()).unwrap();
        assert_eq!(back.state(), e.state());
        let q = KnnQuery { q: ds.objects[9].clone(), weights: WeightVector::new(vec![0.2, 0.7, 0.4]).unwrap(), k: 10 };
        assert_eq!(back.execute_knn(&q).unwrap(), e.execute_knn(&q).unwrap());
    }

    #[test]
    fn rejects_damage() {
        let ds = synth::uniform(&SynthConfig { n: 60, sample_pairs: 500, ..SynthConfig::default() }).unwrap();
        let e = Engine::build(&ds, EngineConfig { leaf_capacity: 16, ..EngineConfig::default() }).unwrap();
        let bytes = encode_index(e.state()).unwrap();
        assert!(matches!(decode_index(&bytes[..bytes.len() - 3]), Err(Error::Corrupt(_) | Error::Bincode(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_index(&bad), Err(Error::Corrupt(_))));
        let mut bad = bytes;
        bad[4] = 9;
        assert!(matches!(decode_index(&bad), Err(Error::Corrupt(_))));
        assert!(matches!(read_index("/nonexistent/idx.bin"), Err(Error::IndexNotBuilt(_))));
    }
}

//! Binary network snapshots plus a small TOML header per snapshot directory.
//!
//! Network file layout, all integers little-endian:
//! `b"NOMAAOI\0"`, u32 format version, u32 network count, then per network:
//! u32 name length, UTF-8 name, u32 width count, u32 widths, u8 output
//! activation (0 identity, 1 sigmoid), u64 parameter count, f64 parameters.

use std::path::Path;

use noma_aoi_core::agents::HybridPolicy;
use noma_aoi_core::meta::MetaParams;
use noma_aoi_core::nn::{Architecture, Mlp, OutputActivation};
use noma_aoi_core::pareto::PolicyTag;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"NOMAAOI\0";
pub const FORMAT_VERSION: u32 = 1;
pub const NETWORKS_FILE: &str = "networks.bin";
pub const HEADER_FILE: &str = "snapshot.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotKind {
    Policy,
    Meta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotHeader {
    pub kind: SnapshotKind,
    /// Policy family the weights came from.
    pub tag: PolicyTag,
    pub format_version: u32,
    pub processes: usize,
    pub hidden: Vec<usize>,
    /// Preference weight of a policy snapshot.
    pub zeta: Option<f64>,
    pub seed: u64,
    /// Episodes (policy) or meta-iterations (meta) behind the weights.
    pub training: usize,
}

pub fn encode_networks(nets: &[(&str, &Mlp)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(nets.len() as u32).to_le_bytes());
    for (name, net) in nets {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        let arch = net.architecture();
        out.extend_from_slice(&(arch.widths.len() as u32).to_le_bytes());
        for &w in &arch.widths {
            out.extend_from_slice(&(w as u32).to_le_bytes());
        }
        out.push(match arch.output {
            OutputActivation::Identity => 0,
            OutputActivation::Sigmoid => 1,
        });
        out.extend_from_slice(&(net.params().len() as u64).to_le_bytes());
        for p in net.params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }
}

pub fn decode_networks(bytes: &[u8], path: &Path) -> Result<Vec<(String, Mlp)>> {
    let bad = |reason: &str| Error::snapshot(path, reason);
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8) != Some(&MAGIC[..]) {
        return Err(bad("not a network snapshot (bad magic)"));
    }
    let version = r.u32().ok_or_else(|| bad("truncated header"))?;
    if version != FORMAT_VERSION {
        return Err(bad(&format!("unsupported format version {version}")));
    }
    let count = r.u32().ok_or_else(|| bad("truncated header"))?;
    let mut nets = Vec::new();
    for _ in 0..count {
        let truncated = || bad("truncated network record");
        let len = r.u32().ok_or_else(truncated)? as usize;
        let name = std::str::from_utf8(r.take(len).ok_or_else(truncated)?)
            .map_err(|_| bad("network name is not UTF-8"))?
            .to_string();
        let n_widths = r.u32().ok_or_else(truncated)? as usize;
        if n_widths < 2 {
            return Err(bad("a network needs at least input and output widths"));
        }
        let widths = (0..n_widths).map(|_| r.u32().map(|w| w as usize)).collect::<Option<Vec<_>>>().ok_or_else(truncated)?;
        let output = match r.take(1).ok_or_else(truncated)?[0] {
            0 => OutputActivation::Identity,
            1 => OutputActivation::Sigmoid,
            k => return Err(bad(&format!("unknown output activation {k}"))),
        };
        let n_params = r.u64().ok_or_else(truncated)? as usize;
        let raw = r.take(n_params.checked_mul(8).ok_or_else(truncated)?).ok_or_else(truncated)?;
        let params = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let arch = Architecture { widths, output };
        let net = Mlp::from_params(arch, params).map_err(|e| bad(&format!("network `{name}`: {e}")))?;
        nets.push((name, net));
    }
    if r.pos != bytes.len() {
        return Err(bad("trailing bytes after the last network"));
    }
    Ok(nets)
}

fn write_snapshot(dir: &Path, header: &SnapshotHeader, nets: &[(&str, &Mlp)]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let bin = dir.join(NETWORKS_FILE);
    std::fs::write(&bin, encode_networks(nets)).map_err(|e| Error::io(&bin, e))?;
    let head = dir.join(HEADER_FILE);
    let text = toml::to_string(header).expect("header is representable as TOML");
    std::fs::write(&head, text).map_err(|e| Error::io(&head, e))
}

fn read_snapshot(dir: &Path, kind: SnapshotKind) -> Result<(SnapshotHeader, Vec<(String, Mlp)>)> {
    let head = dir.join(HEADER_FILE);
    let text = std::fs::read_to_string(&head).map_err(|e| Error::io(&head, e))?;
    let header: SnapshotHeader = toml::from_str(&text).map_err(|e| Error::snapshot(&head, e.message().trim()))?;
    if header.kind != kind {
        return Err(Error::snapshot(&head, format!("expected a {kind:?} snapshot, found {:?}", header.kind)));
    }
    let bin = dir.join(NETWORKS_FILE);
    let bytes = std::fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    Ok((header, decode_networks(&bytes, &bin)?))
}

fn take(nets: &mut Vec<(String, Mlp)>, name: &str, path: &Path) -> Result<Mlp> {
    let k = nets
        .iter()
        .position(|(n, _)| n == name)
        .ok_or_else(|| Error::snapshot(path, format!("missing network `{name}`")))?;
    Ok(nets.swap_remove(k).1)
}

pub fn save_policy(dir: &Path, policy: &HybridPolicy, tag: PolicyTag, seed: u64, episodes: usize) -> Result<()> {
    let header = SnapshotHeader {
        kind: SnapshotKind::Policy,
        tag,
        format_version: FORMAT_VERSION,
        processes: policy.processes(),
        hidden: hidden_widths(&policy.actor),
        zeta: Some(policy.zeta),
        seed,
        training: episodes,
    };
    write_snapshot(
        dir,
        &header,
        &[
            ("dqn", &policy.dqn),
            ("dqn_target", &policy.dqn_target),
            ("actor", &policy.actor),
            ("actor_target", &policy.actor_target),
            ("critic", &policy.critic),
            ("critic_target", &policy.critic_target),
        ],
    )
}

pub fn load_policy(dir: &Path) -> Result<(SnapshotHeader, HybridPolicy)> {
    let (header, mut nets) = read_snapshot(dir, SnapshotKind::Policy)?;
    let bin = dir.join(NETWORKS_FILE);
    let policy = HybridPolicy {
        zeta: header.zeta.ok_or_else(|| Error::snapshot(dir.join(HEADER_FILE), "policy snapshot without zeta"))?,
        dqn: take(&mut nets, "dqn", &bin)?,
        dqn_target: take(&mut nets, "dqn_target", &bin)?,
        actor: take(&mut nets, "actor", &bin)?,
        actor_target: take(&mut nets, "actor_target", &bin)?,
        critic: take(&mut nets, "critic", &bin)?,
        critic_target: take(&mut nets, "critic_target", &bin)?,
    };
    Ok((header, policy))
}

pub fn save_meta(dir: &Path, meta: &MetaParams, seed: u64, iterations: usize) -> Result<()> {
    let header = SnapshotHeader {
        kind: SnapshotKind::Meta,
        tag: PolicyTag::Meta,
        format_version: FORMAT_VERSION,
        processes: meta.actor.architecture().output_width(),
        hidden: hidden_widths(&meta.actor),
        zeta: None,
        seed,
        training: iterations,
    };
    write_snapshot(dir, &header, &[("dqn", &meta.dqn), ("actor", &meta.actor), ("critic", &meta.critic)])
}

pub fn load_meta(dir: &Path) -> Result<(SnapshotHeader, MetaParams)> {
    let (header, mut nets) = read_snapshot(dir, SnapshotKind::Meta)?;
    let bin = dir.join(NETWORKS_FILE);
    let meta = MetaParams {
        dqn: take(&mut nets, "dqn", &bin)?,
        actor: take(&mut nets, "actor", &bin)?,
        critic: take(&mut nets, "critic", &bin)?,
    };
    Ok((header, meta))
}

fn hidden_widths(net: &Mlp) -> Vec<usize> {
    let w = &net.architecture().widths;
    w[1..w.len() - 1].to_vec()
}

//! Checkpoint files: a text header (config echo, policy shape, layer
//! manifest) followed by the parameters as little-endian f64.

use std::path::Path;

use super::policy::{NetConfig, Policy, PolicySpec, Structure};
use crate::error::{Error, Result};

const MAGIC: &str = "hrlgym-checkpoint 1";
const MAX_PARAMS: usize = 1 << 28;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    /// Effective run configuration, one `key = value` per line.
    pub config: String,
    pub episodes: u64,
    pub env_steps: u64,
    pub spec: PolicySpec,
    pub params: Vec<f64>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn capture(policy: &Policy, config: &str, episodes: u64, env_steps: u64) -> Self {
        Self {
            config: config.to_string(),
            episodes,
            env_steps,
            spec: policy.spec().clone(),
            params: policy.to_flat(),
        }
    }

    pub fn to_policy(&self) -> Result<Policy> {
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let mut p = Policy::new(self.spec.clone(), &mut rng)?;
        p.load_flat(&self.params)
            .map_err(|e| bad(format!("parameter blob does not fit the policy: {e}")))?;
        Ok(p)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let policy = self.to_policy()?;
        let s = &self.spec;
        let n = &s.net;
        let mut head = format!("{MAGIC}\nepisodes {}\nenv_steps {}\n", self.episodes, self.env_steps);
        head.push_str("config-begin\n");
        for line in self.config.lines() {
            head.push_str(line);
            head.push('\n');
        }
        head.push_str("config-end\n");
        head.push_str(&format!(
            "structure {}\nembed_dim {}\nnumeric_len {}\nnum_tasks {}\nvalue_head {}\n",
            s.structure.as_str(),
            s.embed_dim,
            s.numeric_len,
            s.num_tasks,
            u8::from(s.value_head)
        ));
        let trunk: Vec<String> = n.trunk.iter().map(usize::to_string).collect();
        head.push_str(&format!(
            "net {} {} {} {} {}\n",
            n.vision_hidden,
            n.task_id_dim,
            n.description_hidden,
            n.numeric_hidden,
            trunk.join(",")
        ));
        head.push_str("manifest-begin\n");
        for (name, len) in policy.manifest() {
            head.push_str(&format!("{name} {len}\n"));
        }
        head.push_str("manifest-end\n");
        head.push_str(&format!("params {}\n", self.params.len()));
        let mut out = head.into_bytes();
        out.reserve(self.params.len() * 8);
        for x in &self.params {
            out.extend_from_slice(&x.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut next_line = || -> Result<&str> {
            let rest = &bytes[pos..];
            let end = rest
                .iter()
                .position(|b| *b == b'\n')
                .ok_or_else(|| bad("truncated header"))?;
            pos += end + 1;
            std::str::from_utf8(&rest[..end]).map_err(|_| bad("header is not UTF-8"))
        };
        fn field<'a>(line: &'a str, key: &str) -> Result<&'a str> {
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| bad(format!("expected {key:?}, found {line:?}")))
        }
        fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
            s.parse().map_err(|_| bad(format!("invalid {what} {s:?}")))
        }

        if next_line()? != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let episodes = num(field(next_line()?, "episodes")?, "episodes")?;
        let env_steps = num(field(next_line()?, "env_steps")?, "env_steps")?;
        if next_line()? != "config-begin" {
            return Err(bad("missing config section"));
        }
        let mut config = String::new();
        loop {
            let l = next_line()?;
            if l == "config-end" {
                break;
            }
            config.push_str(l);
            config.push('\n');
        }
        let structure = Structure::from_name(field(next_line()?, "structure")?).map_err(|e| bad(e.to_string()))?;
        let embed_dim: usize = num(field(next_line()?, "embed_dim")?, "embed_dim")?;
        let numeric_len: usize = num(field(next_line()?, "numeric_len")?, "numeric_len")?;
        let num_tasks: usize = num(field(next_line()?, "num_tasks")?, "num_tasks")?;
        let value_head = match field(next_line()?, "value_head")? {
            "0" => false,
            "1" => true,
            other => return Err(bad(format!("invalid value_head {other:?}"))),
        };
        let net_line = field(next_line()?, "net")?.to_string();
        let parts: Vec<&str> = net_line.split(' ').collect();
        if parts.len() != 5 {
            return Err(bad("net line needs five fields"));
        }
        let trunk = parts[4]
            .split(',')
            .map(|t| num::<usize>(t, "trunk width"))
            .collect::<Result<Vec<_>>>()?;
        let net = NetConfig {
            vision_hidden: num(parts[0], "vision width")?,
            task_id_dim: num(parts[1], "task id width")?,
            description_hidden: num(parts[2], "description width")?,
            numeric_hidden: num(parts[3], "numeric width")?,
            trunk,
        };
        let spec = PolicySpec {
            structure,
            net,
            embed_dim,
            numeric_len,
            num_tasks,
            value_head,
        };
        let mut manifest = Vec::new();
        if next_line()? != "manifest-begin" {
            return Err(bad("missing manifest"));
        }
        loop {
            let l = next_line()?;
            if l == "manifest-end" {
                break;
            }
            let (name, len) = l.rsplit_once(' ').ok_or_else(|| bad(format!("bad manifest line {l:?}")))?;
            manifest.push((name.to_string(), num::<usize>(len, "block length")?));
        }
        let count: usize = num(field(next_line()?, "params")?, "parameter count")?;
        let total: usize = manifest.iter().try_fold(0usize, |acc, (_, n)| acc.checked_add(*n))
            .ok_or_else(|| bad("manifest overflows"))?;
        if count != total || count > MAX_PARAMS {
            return Err(bad(format!("parameter count {count} disagrees with manifest total {total}")));
        }
        let blob = &bytes[pos..];
        if blob.len() != count * 8 {
            return Err(bad(format!("expected {} blob bytes, found {}", count * 8, blob.len())));
        }
        let params: Vec<f64> = blob
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let ck = Self {
            config,
            episodes,
            env_steps,
            spec,
            params,
        };
        // Rebuilding the policy checks the shape matches the manifest.
        let policy = ck.to_policy()?;
        if policy.manifest() != manifest {
            return Err(bad("manifest does not match the declared shape"));
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

use super::{CliResult, RunConfig};
use multicut::numerics::DD_DIGITS;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub precision_digits: u32,
}

pub struct Output {
    dir: PathBuf,
    pub header: Header,
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    header: &'a Header,
    result: &'a T,
}

/// 17 significant digits, `.` decimal.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

impl Output {
    pub fn new(cfg: &RunConfig, command: &str) -> CliResult<Self> {
        // where results go and how many threads compute them do not change them
        let mut hashed = cfg.clone();
        hashed.out = None;
        hashed.threads = None;
        let canonical = serde_json::to_string(&hashed).map_err(multicut::Error::from)?;
        let digest = Sha256::digest(format!("{command}\n{canonical}").as_bytes());
        let mut hash = String::with_capacity(64);
        for b in digest.iter() {
            let _ = write!(hash, "{b:02x}");
        }
        Ok(Output {
            dir: cfg.out_dir(),
            header: Header {
                tool: "multicut".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: command.into(),
                config_hash: hash,
                seed: cfg.seed,
                precision_digits: cfg.precision.unwrap_or(DD_DIGITS),
            },
        })
    }

    fn path(&self, name: &str) -> CliResult<PathBuf> {
        std::fs::create_dir_all(&self.dir)?;
        Ok(self.dir.join(name))
    }

    pub fn json<T: Serialize>(&self, name: &str, result: &T) -> CliResult<PathBuf> {
        let p = self.path(name)?;
        let doc = Document {
            header: &self.header,
            result,
        };
        let mut text = serde_json::to_string_pretty(&doc).map_err(multicut::Error::from)?;
        text.push('\n');
        std::fs::write(&p, text)?;
        println!("wrote {}", p.display());
        Ok(p)
    }

    /// CSV with the header block as `#` comment lines.
    pub fn csv(&self, name: &str, columns: &[&str], rows: &[Vec<f64>]) -> CliResult<PathBuf> {
        let p = self.path(name)?;
        let h = &self.header;
        let mut text = format!(
            "# tool {} {}\n# command {}\n# config_hash {}\n# seed {}\n# precision_digits {}\n",
            h.tool,
            h.version,
            h.command,
            h.config_hash,
            h.seed.map_or("none".into(), |s| s.to_string()),
            h.precision_digits
        );
        text.push_str(&columns.join(","));
        text.push('\n');
        for r in rows {
            let line: Vec<String> = r.iter().map(|&x| num(x)).collect();
            text.push_str(&line.join(","));
            text.push('\n');
        }
        std::fs::write(&p, text)?;
        println!("wrote {}", p.display());
        Ok(p)
    }
}

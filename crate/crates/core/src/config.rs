//! Run configuration: defaults, a `key = value` file, then command-line
//! overrides.
//!
//! ```text
//! # comments and blank lines are ignored
//! captions = data/dev.csv
//! format = clotho
//! variant = logmel
//! audio_hidden = 32, 64
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::captioner::Variant;
use crate::dataset::CsvFormat;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub captions: Option<PathBuf>,
    pub format: CsvFormat,
    pub media_dir: Option<PathBuf>,
    pub eval_captions: Option<PathBuf>,
    pub eval_format: Option<CsvFormat>,
    pub eval_media_dir: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub out: PathBuf,
    pub val_fraction: f64,

    pub variant: Variant,
    pub use_sve: bool,
    pub seed: u64,
    pub clip_seconds: f64,
    pub vggish_rows: usize,

    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub audio_hidden: [usize; 2],
    pub text_hidden: usize,
    pub embed_dim: usize,
    pub decoder_hidden: usize,
    pub dropout: f64,
    pub max_len: usize,

    pub w2v_epochs: usize,
    pub w2v_window: usize,
    pub w2v_negatives: usize,

    pub mlp_hidden: Vec<usize>,
    pub mlp_epochs: usize,
    pub mlp_dropout: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            captions: None,
            format: CsvFormat::Generic,
            media_dir: None,
            eval_captions: None,
            eval_format: None,
            eval_media_dir: None,
            lexicon: None,
            cache_dir: None,
            out: PathBuf::from("run"),
            val_fraction: 0.1,
            variant: Variant::Panns,
            use_sve: true,
            seed: 0,
            clip_seconds: 30.0,
            vggish_rows: 30,
            epochs: 50,
            batch: 64,
            lr: 0.001,
            audio_hidden: [32, 64],
            text_hidden: 128,
            embed_dim: 256,
            decoder_hidden: 128,
            dropout: 0.5,
            max_len: 22,
            w2v_epochs: 15,
            w2v_window: 5,
            w2v_negatives: 5,
            mlp_hidden: vec![1024, 1024, 512, 512, 256, 256],
            mlp_epochs: 100,
            mlp_dropout: 0.5,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value for `{key}`: {value:?}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("bad value for `{key}`: {value:?} (use on/off)"))),
    }
}

fn path_or_none(value: &str) -> Option<PathBuf> {
    (!value.is_empty() && value != "none").then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or_else(|| "none".into(), |p| p.display().to_string())
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "captions" => self.captions = path_or_none(v),
            "format" => self.format = v.parse()?,
            "media_dir" => self.media_dir = path_or_none(v),
            "eval_captions" => self.eval_captions = path_or_none(v),
            "eval_format" => self.eval_format = if v == "none" { None } else { Some(v.parse()?) },
            "eval_media_dir" => self.eval_media_dir = path_or_none(v),
            "lexicon" => self.lexicon = path_or_none(v),
            "cache_dir" => self.cache_dir = path_or_none(v),
            "out" => self.out = PathBuf::from(v),
            "val_fraction" => self.val_fraction = parse(key, v)?,
            "variant" => self.variant = v.parse()?,
            "use_sve" => self.use_sve = parse_bool(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "clip_seconds" => self.clip_seconds = parse(key, v)?,
            "vggish_rows" => self.vggish_rows = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "batch" => self.batch = parse(key, v)?,
            "lr" => self.lr = parse(key, v)?,
            "audio_hidden" => {
                let l = parse_list(key, v)?;
                self.audio_hidden = l
                    .try_into()
                    .map_err(|_| Error::Config("`audio_hidden` takes two widths".into()))?;
            }
            "text_hidden" => self.text_hidden = parse(key, v)?,
            "embed_dim" => self.embed_dim = parse(key, v)?,
            "decoder_hidden" => self.decoder_hidden = parse(key, v)?,
            "dropout" => self.dropout = parse(key, v)?,
            "max_len" => self.max_len = parse(key, v)?,
            "w2v_epochs" => self.w2v_epochs = parse(key, v)?,
            "w2v_window" => self.w2v_window = parse(key, v)?,
            "w2v_negatives" => self.w2v_negatives = parse(key, v)?,
            "mlp_hidden" => self.mlp_hidden = parse_list(key, v)?,
            "mlp_epochs" => self.mlp_epochs = parse(key, v)?,
            "mlp_dropout" => self.mlp_dropout = parse(key, v)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Relative paths stay
    /// relative to the working directory.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            self.set(k.trim(), v)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        let mut c = Self::default();
        c.apply_text(&text)?;
        Ok(c)
    }

    /// Every key with its resolved value, in the file syntax.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("captions", show_path(&self.captions));
        kv("format", format!("{:?}", self.format).to_lowercase());
        kv("media_dir", show_path(&self.media_dir));
        kv("eval_captions", show_path(&self.eval_captions));
        kv(
            "eval_format",
            self.eval_format.map_or_else(|| "none".into(), |f| format!("{f:?}").to_lowercase()),
        );
        kv("eval_media_dir", show_path(&self.eval_media_dir));
        kv("lexicon", show_path(&self.lexicon));
        kv("cache_dir", show_path(&self.cache_dir));
        kv("out", self.out.display().to_string());
        kv("val_fraction", self.val_fraction.to_string());
        kv("variant", self.variant.to_string());
        kv("use_sve", if self.use_sve { "on" } else { "off" }.into());
        kv("seed", self.seed.to_string());
        kv("clip_seconds", self.clip_seconds.to_string());
        kv("vggish_rows", self.vggish_rows.to_string());
        kv("epochs", self.epochs.to_string());
        kv("batch", self.batch.to_string());
        kv("lr", self.lr.to_string());
        kv("audio_hidden", join(&self.audio_hidden));
        kv("text_hidden", self.text_hidden.to_string());
        kv("embed_dim", self.embed_dim.to_string());
        kv("decoder_hidden", self.decoder_hidden.to_string());
        kv("dropout", self.dropout.to_string());
        kv("max_len", self.max_len.to_string());
        kv("w2v_epochs", self.w2v_epochs.to_string());
        kv("w2v_window", self.w2v_window.to_string());
        kv("w2v_negatives", self.w2v_negatives.to_string());
        kv("mlp_hidden", join(&self.mlp_hidden));
        kv("mlp_epochs", self.mlp_epochs.to_string());
        kv("mlp_dropout", self.mlp_dropout.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_override_defaults() {
        let mut c = RunConfig::default();
        c.apply_text("# run\n\nvariant = logmel\naudio_hidden = 8, 16\nuse_sve = off\ncaptions = a b.csv\n")
            .unwrap();
        assert_eq!(c.variant, Variant::Logmel);
        assert_eq!(c.audio_hidden, [8, 16]);
        assert!(!c.use_sve);
        assert_eq!(c.captions, Some(PathBuf::from("a b.csv")));
        assert_eq!(c.epochs, 50);
    }

    #[test]
    fn resolved_text_round_trips() {
        let mut c = RunConfig::default();
        c.set("mlp_hidden", "4,4").unwrap();
        c.set("eval_format", "clotho").unwrap();
        let mut d = RunConfig::default();
        d.apply_text(&c.to_text()).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn errors_name_the_line() {
        let mut c = RunConfig::default();
        let e = c.apply_text("seed = 1\nbogus = 2\n").unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("bogus"), "{e}");
        assert!(c.apply_text("epochs = many").is_err());
        assert!(c.apply_text("audio_hidden = 1,2,3").is_err());
        assert!(c.apply_text("no equals sign").is_err());
    }
}

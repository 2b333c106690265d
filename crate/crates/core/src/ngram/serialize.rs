//! Model persistence: a compact binary count format plus ARPA text export.
//!
//! The binary file stores only the training configuration, vocabulary, and
//! raw k-gram counts; every derived table is rebuilt on load, so a loaded
//! model produces bit-identical probabilities to the freshly trained one.
//! Table entries are written in sorted id order, making the bytes of
//! `save` deterministic for a given model.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{CountTable, LmConfig, NGramLM, Smoothing, BOS, EOS, UNK};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"DKLM";
const FORMAT_VERSION: u32 = 1;

impl NGramLM {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = BufWriter::new(file);
        self.to_writer(&mut writer).map_err(|e| Error::io(path, e))?;
        writer.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        NGramLM::from_reader(&mut BufReader::new(file))
    }

    pub fn to_writer(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&[self.config.order as u8])?;
        match self.config.smoothing {
            Smoothing::AddK { k } => {
                w.write_all(&[0u8])?;
                w.write_all(&k.to_le_bytes())?;
            }
            Smoothing::KneserNey => w.write_all(&[1u8])?,
        }
        w.write_all(&self.config.min_count.to_le_bytes())?;

        w.write_all(&(self.vocab.len() as u32).to_le_bytes())?;
        for token in &self.vocab {
            w.write_all(&(token.len() as u32).to_le_bytes())?;
            w.write_all(token.as_bytes())?;
        }

        for table in &self.counts {
            let mut entries: Vec<(&[u32], u64)> =
                table.iter().map(|(g, c)| (g.as_ref(), *c)).collect();
            entries.sort_unstable();
            w.write_all(&(entries.len() as u64).to_le_bytes())?;
            for (gram, count) in entries {
                for id in gram {
                    w.write_all(&id.to_le_bytes())?;
                }
                w.write_all(&count.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn from_reader(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Corrupt("bad magic bytes".into()));
        }
        let version = read_u32(r)?;
        if version > FORMAT_VERSION {
            return Err(Error::Version { found: version, supported: FORMAT_VERSION });
        }

        let order = read_u8(r)? as usize;
        if !(1..=8).contains(&order) {
            return Err(Error::Corrupt(format!("implausible order {order}")));
        }
        let smoothing = match read_u8(r)? {
            0 => {
                let k = f64::from_le_bytes(read_array(r)?);
                if !(k > 0.0) || !k.is_finite() {
                    return Err(Error::Corrupt(format!("invalid add-k pseudo-count {k}")));
                }
                Smoothing::AddK { k }
            }
            1 => Smoothing::KneserNey,
            tag => return Err(Error::Corrupt(format!("unknown smoothing tag {tag}"))),
        };
        let min_count = read_u64(r)?;

        let vocab_len = read_u32(r)? as usize;
        if vocab_len < 3 {
            return Err(Error::Corrupt("vocabulary lost its reserved markers".into()));
        }
        let mut vocab = Vec::with_capacity(vocab_len);
        for _ in 0..vocab_len {
            let len = read_u32(r)? as usize;
            if len > 1 << 20 {
                return Err(Error::Corrupt(format!("implausible token length {len}")));
            }
            let mut bytes = vec![0u8; len];
            read_exact(r, &mut bytes)?;
            vocab.push(String::from_utf8(bytes).map_err(|_| {
                Error::Corrupt("vocabulary entry is not valid UTF-8".into())
            })?);
        }
        if vocab[0] != BOS || vocab[1] != EOS || vocab[2] != UNK {
            return Err(Error::Corrupt("reserved markers out of place".into()));
        }

        let mut counts = Vec::with_capacity(order);
        for k in 1..=order {
            let entries = read_u64(r)?;
            let mut table = CountTable::with_capacity(entries.min(1 << 22) as usize);
            for _ in 0..entries {
                let mut gram = Vec::with_capacity(k);
                for _ in 0..k {
                    let id = read_u32(r)?;
                    if id as usize >= vocab_len {
                        return Err(Error::Corrupt(format!("token id {id} out of range")));
                    }
                    gram.push(id);
                }
                let count = read_u64(r)?;
                table.insert(gram.into_boxed_slice(), count);
            }
            counts.push(table);
        }

        let mut trailer = [0u8; 1];
        if r.read(&mut trailer).map_err(|e| Error::Corrupt(e.to_string()))? != 0 {
            return Err(Error::Corrupt("trailing bytes after count tables".into()));
        }

        let index =
            vocab.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        let mut model = NGramLM {
            config: LmConfig { order, smoothing, min_count },
            vocab,
            index,
            counts,
            ctx_totals: Vec::new(),
            cont: Vec::new(),
            cont_ctx_totals: Vec::new(),
            distinct_ext: Vec::new(),
            discounts: Vec::new(),
        };
        model.rebuild_derived();
        Ok(model)
    }

    /// Write the model in ARPA text format (log10 probabilities). Backoff
    /// weights are meaningful for Kneser-Ney models; add-k models emit plain
    /// probability lines, since additive smoothing has no backoff structure.
    pub fn export_arpa(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "\\data\\")?;
        writeln!(w, "ngram 1={}", self.vocab.len())?;
        for k in 2..=self.config.order {
            writeln!(w, "ngram {}={}", k, self.counts[k - 1].len())?;
        }
        writeln!(w)?;

        writeln!(w, "\\1-grams:")?;
        for (id, token) in self.vocab.iter().enumerate() {
            let p = self.cond_prob_ids(&[], id as u32).log10();
            match self.backoff_weight(&[id as u32]) {
                Some(b) => writeln!(w, "{:.7}\t{}\t{:.7}", p, token, b.log10())?,
                None => writeln!(w, "{:.7}\t{}", p, token)?,
            }
        }

        for k in 2..=self.config.order {
            writeln!(w)?;
            writeln!(w, "\\{k}-grams:")?;
            let mut grams: Vec<&[u32]> = self.counts[k - 1].keys().map(|g| g.as_ref()).collect();
            grams.sort_unstable();
            for gram in grams {
                let p = self.cond_prob_ids(&gram[..k - 1], gram[k - 1]).log10();
                let text: Vec<&str> =
                    gram.iter().map(|&id| self.vocab[id as usize].as_str()).collect();
                match self.backoff_weight(gram) {
                    Some(b) => writeln!(w, "{:.7}\t{}\t{:.7}", p, text.join(" "), b.log10())?,
                    None => writeln!(w, "{:.7}\t{}", p, text.join(" "))?,
                }
            }
        }
        writeln!(w)?;
        writeln!(w, "\\end\\")
    }

    /// Mass reserved for backed-off continuations after the context `ctx`,
    /// i.e. the ARPA backoff weight. `None` when the model has no backoff
    /// structure (add-k), the context is at the top order, or it was never
    /// observed (full fall-through, weight 1).
    fn backoff_weight(&self, ctx: &[u32]) -> Option<f64> {
        if self.config.smoothing != Smoothing::KneserNey {
            return None;
        }
        let level = ctx.len() + 1;
        if level > self.config.order {
            return None;
        }
        let ctot = if level == self.config.order {
            self.ctx_totals[level - 1].get(ctx).copied()
        } else {
            self.cont_ctx_totals[level - 1].get(ctx).copied()
        }
        .filter(|&c| c > 0)?;
        let ext = self.distinct_ext[level - 1].get(ctx).copied().unwrap_or(0) as f64;
        Some(self.discounts[level - 1] * ext / ctot as f64)
    }
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| Error::Corrupt(format!("unexpected end of model file: {e}")))
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    read_exact(r, &mut buf)?;
    Ok(buf)
}

fn read_u8(r: &mut impl Read) -> Result<u8> {
    Ok(read_array::<1>(r)?[0])
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

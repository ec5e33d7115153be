use crate::captioner::Captioner;
use crate::error::Result;
use crate::nn::Tensor;
use crate::text::Vocabulary;

/// Greedy decoding for each clip: start from `<sos>`, append the most
/// likely word (lowest index on ties) until `<eos>` or `max_len` tokens.
///
/// Audio encodings are computed once per clip and reused at every step;
/// unfinished clips are decoded together.
pub fn greedy_decode(model: &Captioner, clips: &[&Tensor], max_len: usize) -> Result<Vec<Vec<usize>>> {
    if clips.is_empty() {
        return Ok(Vec::new());
    }
    let mut audio_rows = Vec::with_capacity(clips.len());
    // clips of different lengths are encoded in separate groups
    let mut i = 0;
    while i < clips.len() {
        let mut j = i + 1;
        while j < clips.len() && clips[j].rows() == clips[i].rows() && j - i < 256 {
            j += 1;
        }
        let enc = model.audio_encodings(&clips[i..j])?;
        for r in 0..enc.rows() {
            audio_rows.push(enc.row_slice(r).to_vec());
        }
        i = j;
    }
    let width = model.audio_width();
    let mut seqs: Vec<Vec<usize>> = vec![vec![Vocabulary::SOS_ID]; clips.len()];
    let max_len = max_len.max(1);
    loop {
        let active: Vec<usize> = (0..clips.len())
            .filter(|&c| seqs[c].len() < max_len && *seqs[c].last().unwrap() != Vocabulary::EOS_ID)
            .collect();
        if active.is_empty() {
            break;
        }
        let mut a = Vec::with_capacity(active.len() * width);
        for &c in &active {
            a.extend_from_slice(&audio_rows[c]);
        }
        let audio = Tensor::matrix(active.len(), width, a)?;
        let prefixes: Vec<&[usize]> = active.iter().map(|&c| seqs[c].as_slice()).collect();
        let probs = model.decode_step(&audio, &prefixes)?;
        for (r, &c) in active.iter().enumerate() {
            let next = probs.argmax_row(r);
            seqs[c].push(next);
        }
    }
    Ok(seqs)
}

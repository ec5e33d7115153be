use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::audio::WaveBuffer;
use crate::error::{Error, Result};

/// Reads a PCM WAV file (8/16/24-bit integer or 32-bit float, mono or
/// stereo). Stereo is averaged to mono; integer samples are scaled by
/// `2^(bits-1)` into `[-1, 1)`.
pub fn load_wav(path: &Path) -> Result<WaveBuffer> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let malformed = |reason: String| Error::MalformedWav {
        path: path.to_path_buf(),
        reason,
    };
    let unsupported = |reason: String| Error::UnsupportedEncoding {
        path: path.to_path_buf(),
        reason,
    };
    let reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::Io(io),
        hound::Error::Unsupported => unsupported("non-PCM or extensible format".into()),
        hound::Error::FormatError(m) => malformed(m.to_string()),
        other => malformed(other.to_string()),
    })?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.channels > 2 {
        return Err(unsupported(format!("{} channels", spec.channels)));
    }
    if spec.sample_rate == 0 {
        return Err(malformed("sample rate is zero".into()));
    }
    let read_err = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => malformed(other.to_string()),
    };
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, bits @ (8 | 16 | 24)) => {
            let scale = (1i64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(read_err)?
        }
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(read_err)?,
        (fmt, bits) => return Err(unsupported(format!("{bits}-bit {fmt:?}"))),
    };
    let channels = spec.channels as usize;
    let samples: Vec<f64> = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    WaveBuffer::new(samples, spec.sample_rate).map_err(|e| malformed(e.to_string()))
}

/// Writes a mono 16-bit PCM WAV, clamping samples to `[-1, 1]`.
pub fn write_wav_i16(path: &Path, buf: &WaveBuffer) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: buf.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let to_err = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::InvalidInput(other.to_string()),
    };
    let mut w = WavWriter::create(path, spec).map_err(to_err)?;
    for &s in &buf.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        w.write_sample(v).map_err(to_err)?;
    }
    w.finalize().map_err(to_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Minimal RIFF/WAVE writer so fixtures do not depend on the reader's
    /// own library.
    pub(crate) fn raw_wav(channels: u16, rate: u32, bits: u16, format: u16, payload: &[u8]) -> Vec<u8> {
        let block_align = channels * bits / 8;
        let mut v = Vec::new();
        v.extend_from_slice(b"RIFF");
        v.extend_from_slice(&(36 + payload.len() as u32).to_le_bytes());
        v.extend_from_slice(b"WAVEfmt ");
        v.extend_from_slice(&16u32.to_le_bytes());
        v.extend_from_slice(&format.to_le_bytes());
        v.extend_from_slice(&channels.to_le_bytes());
        v.extend_from_slice(&rate.to_le_bytes());
        v.extend_from_slice(&(rate * block_align as u32).to_le_bytes());
        v.extend_from_slice(&block_align.to_le_bytes());
        v.extend_from_slice(&bits.to_le_bytes());
        v.extend_from_slice(b"data");
        v.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        v.extend_from_slice(payload);
        v
    }

    fn write(dir: &tempfile::TempDir, name: &str, bytes: &[u8]) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, bytes).unwrap();
        p
    }

    #[test]
    fn four_sample_i16_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let samples: [i16; 4] = [0, 32767, -32768, 16384];
        let payload: Vec<u8> = samples.iter().flat_map(|s| s.to_le_bytes()).collect();
        let p = write(&dir, "a.wav", &raw_wav(1, 16000, 16, 1, &payload));
        let buf = load_wav(&p).unwrap();
        assert_eq!(buf.sample_rate, 16000);
        assert_eq!(buf.samples, vec![0.0, 32767.0 / 32768.0, -1.0, 0.5]);
        assert!((buf.samples[1] - 0.99997).abs() < 1e-5);
    }

    #[test]
    fn silence_loads_as_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "s.wav", &raw_wav(1, 8000, 16, 1, &[0u8; 200]));
        let buf = load_wav(&p).unwrap();
        assert_eq!(buf.samples.len(), 100);
        assert!(buf.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn stereo_is_averaged() {
        let dir = tempfile::tempdir().unwrap();
        let frame: Vec<u8> = [0.5f32, -0.5f32].iter().flat_map(|s| s.to_le_bytes()).collect();
        let payload = frame.repeat(3);
        let p = write(&dir, "st.wav", &raw_wav(2, 16000, 32, 3, &payload));
        let buf = load_wav(&p).unwrap();
        assert_eq!(buf.samples, vec![0.0; 3]);
    }

    #[test]
    fn eight_and_twenty_four_bit() {
        let dir = tempfile::tempdir().unwrap();
        // 8-bit WAV is unsigned with 128 as zero
        let p = write(&dir, "u8.wav", &raw_wav(1, 8000, 8, 1, &[128, 192, 0]));
        assert_eq!(load_wav(&p).unwrap().samples, vec![0.0, 0.5, -1.0]);
        let s24: [i32; 2] = [1 << 22, -(1 << 23)];
        let payload: Vec<u8> = s24.iter().flat_map(|s| s.to_le_bytes()[..3].to_vec()).collect();
        let p = write(&dir, "s24.wav", &raw_wav(1, 8000, 24, 1, &payload));
        assert_eq!(load_wav(&p).unwrap().samples, vec![0.5, -1.0]);
    }

    #[test]
    fn errors_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_wav(&dir.path().join("nope.wav")),
            Err(Error::MissingFile(_))
        ));
        let p = write(&dir, "junk.wav", b"RIFX not a wave file at all....................");
        assert!(matches!(load_wav(&p), Err(Error::MalformedWav { .. })));
        // format code 2 = ADPCM
        let p = write(&dir, "adpcm.wav", &raw_wav(1, 8000, 16, 2, &[0u8; 8]));
        assert!(matches!(load_wav(&p), Err(Error::UnsupportedEncoding { .. })));
        let payload: Vec<u8> = [1i32, 2].iter().flat_map(|s| s.to_le_bytes()).collect();
        let p = write(&dir, "i32.wav", &raw_wav(1, 8000, 32, 1, &payload));
        assert!(matches!(load_wav(&p), Err(Error::UnsupportedEncoding { .. })));
    }

    #[test]
    fn writer_round_trips_through_reader() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rt.wav");
        let buf = WaveBuffer::new(vec![0.0, 0.25, -0.5], 22050).unwrap();
        write_wav_i16(&p, &buf).unwrap();
        let back = load_wav(&p).unwrap();
        assert_eq!(back.sample_rate, 22050);
        for (a, b) in back.samples.iter().zip(&buf.samples) {
            assert!((a - b).abs() < 1e-4);
        }
    }
}

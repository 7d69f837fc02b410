//! Bit-exact RIFF/WAVE PCM-16 codec and sample-accurate slicing.

use crate::domain::TimeSpan;

use super::IngestError;

const PCM: u16 = 1;
const EXTENSIBLE: u16 = 0xFFFE;
const HEADER_LEN: usize = 44;

/// Interleaved signed 16-bit PCM.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AudioBuffer {
    sample_rate_hz: u32,
    channels: u16,
    samples: Vec<i16>,
}

impl AudioBuffer {
    pub fn new(sample_rate_hz: u32, channels: u16, samples: Vec<i16>) -> Result<Self, IngestError> {
        if sample_rate_hz == 0 {
            return Err(IngestError::UnsupportedFormat(
                "sample rate must be positive".into(),
            ));
        }
        if !(1..=2).contains(&channels) {
            return Err(IngestError::UnsupportedFormat(format!(
                "{channels} channels"
            )));
        }
        if !samples.len().is_multiple_of(channels as usize) {
            return Err(IngestError::MalformedInput(format!(
                "{} samples is not a multiple of {channels} channels",
                samples.len()
            )));
        }
        Ok(Self {
            sample_rate_hz,
            channels,
            samples,
        })
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn channels(&self) -> u16 {
        self.channels
    }

    pub fn samples(&self) -> &[i16] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<i16> {
        self.samples
    }

    /// Samples per channel.
    pub fn frames(&self) -> usize {
        self.samples.len() / self.channels as usize
    }

    pub fn duration_s(&self) -> f64 {
        self.frames() as f64 / self.sample_rate_hz as f64
    }
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

struct Format {
    channels: u16,
    sample_rate_hz: u32,
}

fn parse_fmt(body: &[u8]) -> Result<Format, IngestError> {
    if body.len() < 16 {
        return Err(IngestError::TruncatedFile(
            "fmt chunk shorter than 16 bytes".into(),
        ));
    }
    let mut tag = u16_at(body, 0);
    if tag == EXTENSIBLE {
        // cbSize(2) validBits(2) channelMask(4) then the sub-format GUID.
        if body.len() < 40 {
            return Err(IngestError::TruncatedFile("extensible fmt chunk".into()));
        }
        tag = u16_at(body, 24);
    }
    if tag != PCM {
        return Err(IngestError::UnsupportedFormat(format!("format tag {tag}")));
    }
    let channels = u16_at(body, 2);
    let sample_rate_hz = u32_at(body, 4);
    let bits = u16_at(body, 14);
    if bits != 16 {
        return Err(IngestError::UnsupportedFormat(format!(
            "{bits} bits per sample"
        )));
    }
    if !(1..=2).contains(&channels) {
        return Err(IngestError::UnsupportedFormat(format!(
            "{channels} channels"
        )));
    }
    if sample_rate_hz == 0 {
        return Err(IngestError::UnsupportedFormat("sample rate 0".into()));
    }
    Ok(Format {
        channels,
        sample_rate_hz,
    })
}

/// Decode a PCM-16 WAV file. Chunks after `data` are ignored.
pub fn read_wav(bytes: &[u8]) -> Result<AudioBuffer, IngestError> {
    if bytes.len() < 12 {
        return Err(IngestError::TruncatedFile("missing RIFF header".into()));
    }
    if &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(IngestError::MalformedInput("not a RIFF/WAVE file".into()));
    }
    let mut pos = 12;
    let mut format = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        match id {
            b"fmt " => {
                let end = body_start
                    .checked_add(size)
                    .filter(|&e| e <= bytes.len())
                    .ok_or_else(|| IngestError::TruncatedFile("fmt chunk".into()))?;
                format = Some(parse_fmt(&bytes[body_start..end])?);
            }
            b"data" => {
                let fmt = format
                    .ok_or_else(|| IngestError::MalformedInput("data chunk before fmt".into()))?;
                let end = body_start
                    .checked_add(size)
                    .filter(|&e| e <= bytes.len())
                    .ok_or_else(|| {
                        IngestError::TruncatedFile(format!(
                            "data chunk declares {size} bytes, {} present",
                            bytes.len() - body_start
                        ))
                    })?;
                let block = 2 * fmt.channels as usize;
                if !size.is_multiple_of(block) {
                    return Err(IngestError::TruncatedFile(format!(
                        "data chunk of {size} bytes ends mid-frame"
                    )));
                }
                let samples = bytes[body_start..end]
                    .chunks_exact(2)
                    .map(|c| i16::from_le_bytes([c[0], c[1]]))
                    .collect();
                return AudioBuffer::new(fmt.sample_rate_hz, fmt.channels, samples);
            }
            _ => {}
        }
        // RIFF chunks are word aligned.
        pos = body_start.saturating_add(size).saturating_add(size & 1);
    }
    Err(IngestError::TruncatedFile("no data chunk".into()))
}

/// Canonical 44-byte-header encoding: `fmt ` then `data`, nothing else.
pub fn write_wav(buf: &AudioBuffer) -> Vec<u8> {
    let data_len = buf.samples.len() * 2;
    let block_align = buf.channels * 2;
    let mut out = Vec::with_capacity(HEADER_LEN + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM.to_le_bytes());
    out.extend_from_slice(&buf.channels.to_le_bytes());
    out.extend_from_slice(&buf.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(buf.sample_rate_hz * block_align as u32).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for s in &buf.samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

/// Frame index for a time, floored. Products within 1e-6 of an integer snap
/// to it so that `t = frames / rate` maps back to `frames` exactly.
pub fn frame_at(t_s: f64, sample_rate_hz: u32) -> usize {
    let x = t_s * sample_rate_hz as f64;
    let r = x.round();
    let idx = if (x - r).abs() < 1e-6 { r } else { x.floor() };
    idx.max(0.0) as usize
}

/// Cut `[floor(start*rate), floor(end*rate))` frames out of `buf`.
pub fn slice_audio(buf: &AudioBuffer, span: TimeSpan) -> Result<AudioBuffer, IngestError> {
    let first = frame_at(span.start_s(), buf.sample_rate_hz);
    let last = frame_at(span.end_s(), buf.sample_rate_hz);
    if last > buf.frames() {
        return Err(IngestError::SpanOutOfRange {
            end_s: span.end_s(),
            duration_s: buf.duration_s(),
        });
    }
    let ch = buf.channels as usize;
    Ok(AudioBuffer {
        sample_rate_hz: buf.sample_rate_hz,
        channels: buf.channels,
        samples: buf.samples[first * ch..last * ch].to_vec(),
    })
}

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::CsiMode;

/// One evaluated cell of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransmissionRecord {
    pub mode: CsiMode,
    pub snr_db: f64,
    pub bandwidth_ratio: f64,
    pub m: usize,
    pub sigma_e2: f64,
    pub seed: u64,
    pub psnr_mean: f64,
    pub psnr_std: f64,
    pub n_images: usize,
    pub n_channel_draws: usize,
    pub model_id: String,
}

pub const CSV_HEADER: &str =
    "mode,snr_db,bandwidth_ratio,m,sigma_e2,seed,psnr_mean,psnr_std,n_images,n_channel_draws,model_id";

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

pub fn write_records<W: Write>(out: W, records: &[TransmissionRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(CSV_HEADER.split(',')).map_err(csv_err)?;
    }
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<TransmissionRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(csv_err)?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("unexpected header {header:?}"),
        )));
    }
    rd.deserialize().map(|r| r.map_err(csv_err)).collect()
}

pub fn write_records_file(path: &Path, records: &[TransmissionRecord]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_records(std::fs::File::create(path)?, records)
}

pub fn read_records_file(path: &Path) -> Result<Vec<TransmissionRecord>> {
    read_records(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TransmissionRecord {
        TransmissionRecord {
            mode: CsiMode::Csit,
            snr_db: 0.1 + 0.2,
            bandwidth_ratio: 1.0 / 12.0,
            m: 2,
            sigma_e2: 0.0,
            seed: 7,
            psnr_mean: 27.123456789012345,
            psnr_std: 1.0e-17,
            n_images: 3,
            n_channel_draws: 10,
            model_id: "tiny, \"quoted\"".into(),
        }
    }

    #[test]
    fn header_and_round_trip() {
        let mut buf = Vec::new();
        let mut inf = sample();
        inf.snr_db = f64::INFINITY;
        write_records(&mut buf, &[sample(), inf.clone()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(read_records(&buf[..]).unwrap(), vec![sample(), inf]);
    }

    #[test]
    fn empty_file_keeps_header() {
        let mut buf = Vec::new();
        write_records(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap().trim_end(), CSV_HEADER);
        assert!(read_records(&buf[..]).unwrap().is_empty());
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(read_records("a,b\n1,2\n".as_bytes()).is_err());
    }
}

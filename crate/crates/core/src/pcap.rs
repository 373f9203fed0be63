//! Classic libpcap capture files.
//!
//! A file is a 24-byte global header followed by records, each a 16-byte
//! header and `caplen` bytes of frame data. The byte order and the timestamp
//! resolution of the whole file are fixed by the magic number.
//!
//! [`PcapReader`] streams records one at a time and only ever holds the data
//! of the record it is returning. [`PcapWriter`] emits the same layout, so a
//! parsed file written back with its header reproduces the input bytes.

use std::io::{self, Read, Write};

use thiserror::Error;

pub const GLOBAL_HEADER_LEN: usize = 24;
pub const RECORD_HEADER_LEN: usize = 16;

pub const MAGIC_MICRO: u32 = 0xA1B2_C3D4;
pub const MAGIC_MICRO_SWAPPED: u32 = 0xD4C3_B2A1;
pub const MAGIC_NANO: u32 = 0xA1B2_3C4D;
pub const MAGIC_NANO_SWAPPED: u32 = 0x4D3C_B2A1;
/// Block type of a pcapng section header block, as seen in the first four bytes.
pub const PCAPNG_MAGIC: u32 = 0x0A0D_0D0A;

pub const LINKTYPE_ETHERNET: u32 = 1;
pub const LINKTYPE_RAW: u32 = 101;
pub const LINKTYPE_LINUX_SLL: u32 = 113;

#[derive(Debug, Error)]
pub enum PcapError {
    #[error("not a pcap file: unknown magic {magic:#010x}")]
    UnknownMagic { magic: u32 },
    #[error("pcapng files are not supported, convert to classic pcap first")]
    Pcapng,
    #[error("unsupported pcap version {major}.{minor}")]
    UnsupportedVersion { major: u16, minor: u16 },
    #[error("file ends inside the global header ({got} of 24 bytes)")]
    ShortHeader { got: usize },
    #[error("truncated record after {records_read} complete records")]
    TruncatedRecord { records_read: u64 },
    #[error("record {index}: caplen {caplen} exceeds snaplen {snaplen}")]
    RecordViolatesSnaplen { index: u64, caplen: u32, snaplen: u32 },
    #[error("record {index}: caplen {caplen} does not match data length {data_len} or exceeds origlen {origlen}")]
    InvalidRecord {
        index: u64,
        caplen: u32,
        origlen: u32,
        data_len: usize,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl PcapError {
    /// Both pcapng input and unknown magic are reported as "not a pcap".
    pub fn is_not_pcap(&self) -> bool {
        matches!(
            self,
            PcapError::UnknownMagic { .. }
                | PcapError::Pcapng
                | PcapError::UnsupportedVersion { .. }
                | PcapError::ShortHeader { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ByteOrder {
    Big,
    Little,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TsPrecision {
    Micro,
    Nano,
}

impl TsPrecision {
    pub fn units_per_second(self) -> u32 {
        match self {
            TsPrecision::Micro => 1_000_000,
            TsPrecision::Nano => 1_000_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcapHeader {
    /// The first four bytes read as a big-endian integer.
    pub magic: u32,
    pub version_major: u16,
    pub version_minor: u16,
    pub thiszone: i32,
    pub sigfigs: u32,
    pub snaplen: u32,
    pub linktype: u32,
    pub byte_order: ByteOrder,
    pub ts_precision: TsPrecision,
}

impl PcapHeader {
    /// A version 2.4 header for freshly written files.
    pub fn new(byte_order: ByteOrder, ts_precision: TsPrecision, snaplen: u32, linktype: u32) -> Self {
        let magic = match (byte_order, ts_precision) {
            (ByteOrder::Big, TsPrecision::Micro) => MAGIC_MICRO,
            (ByteOrder::Little, TsPrecision::Micro) => MAGIC_MICRO_SWAPPED,
            (ByteOrder::Big, TsPrecision::Nano) => MAGIC_NANO,
            (ByteOrder::Little, TsPrecision::Nano) => MAGIC_NANO_SWAPPED,
        };
        PcapHeader {
            magic,
            version_major: 2,
            version_minor: 4,
            thiszone: 0,
            sigfigs: 0,
            snaplen,
            linktype,
            byte_order,
            ts_precision,
        }
    }

    pub fn to_bytes(&self) -> [u8; GLOBAL_HEADER_LEN] {
        let magic = match (self.byte_order, self.ts_precision) {
            (_, TsPrecision::Micro) => MAGIC_MICRO,
            (_, TsPrecision::Nano) => MAGIC_NANO,
        };
        let mut out = [0u8; GLOBAL_HEADER_LEN];
        let e = Endian(self.byte_order);
        e.put_u32(&mut out[0..4], magic);
        e.put_u16(&mut out[4..6], self.version_major);
        e.put_u16(&mut out[6..8], self.version_minor);
        e.put_u32(&mut out[8..12], self.thiszone as u32);
        e.put_u32(&mut out[12..16], self.sigfigs);
        e.put_u32(&mut out[16..20], self.snaplen);
        e.put_u32(&mut out[20..24], self.linktype);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketRecord {
    pub index: u64,
    pub ts_sec: u32,
    /// Fractional seconds in the file's precision unit.
    pub ts_frac: u32,
    pub caplen: u32,
    pub origlen: u32,
    pub data: Vec<u8>,
}

impl PacketRecord {
    /// Timestamp in microseconds; nanosecond stamps are truncated.
    pub fn ts_us(&self, precision: TsPrecision) -> i64 {
        let frac = match precision {
            TsPrecision::Micro => i64::from(self.ts_frac),
            TsPrecision::Nano => i64::from(self.ts_frac / 1000),
        };
        i64::from(self.ts_sec) * 1_000_000 + frac
    }
}

#[derive(Clone, Copy)]
struct Endian(ByteOrder);

impl Endian {
    fn u16(self, b: &[u8]) -> u16 {
        let a = [b[0], b[1]];
        match self.0 {
            ByteOrder::Big => u16::from_be_bytes(a),
            ByteOrder::Little => u16::from_le_bytes(a),
        }
    }

    fn u32(self, b: &[u8]) -> u32 {
        let a = [b[0], b[1], b[2], b[3]];
        match self.0 {
            ByteOrder::Big => u32::from_be_bytes(a),
            ByteOrder::Little => u32::from_le_bytes(a),
        }
    }

    fn put_u16(self, out: &mut [u8], v: u16) {
        out.copy_from_slice(&match self.0 {
            ByteOrder::Big => v.to_be_bytes(),
            ByteOrder::Little => v.to_le_bytes(),
        });
    }

    fn put_u32(self, out: &mut [u8], v: u32) {
        out.copy_from_slice(&match self.0 {
            ByteOrder::Big => v.to_be_bytes(),
            ByteOrder::Little => v.to_le_bytes(),
        });
    }
}

/// Checks only the magic number; used to reject uploads before storing them.
pub fn sniff_magic(prefix: &[u8]) -> Result<(ByteOrder, TsPrecision), PcapError> {
    if prefix.len() < 4 {
        return Err(PcapError::ShortHeader { got: prefix.len() });
    }
    let magic = u32::from_be_bytes([prefix[0], prefix[1], prefix[2], prefix[3]]);
    match magic {
        MAGIC_MICRO => Ok((ByteOrder::Big, TsPrecision::Micro)),
        MAGIC_MICRO_SWAPPED => Ok((ByteOrder::Little, TsPrecision::Micro)),
        MAGIC_NANO => Ok((ByteOrder::Big, TsPrecision::Nano)),
        MAGIC_NANO_SWAPPED => Ok((ByteOrder::Little, TsPrecision::Nano)),
        PCAPNG_MAGIC => Err(PcapError::Pcapng),
        other => Err(PcapError::UnknownMagic { magic: other }),
    }
}

pub fn parse_header(bytes: &[u8; GLOBAL_HEADER_LEN]) -> Result<PcapHeader, PcapError> {
    let (byte_order, ts_precision) = sniff_magic(bytes)?;
    let e = Endian(byte_order);
    let version_major = e.u16(&bytes[4..6]);
    let version_minor = e.u16(&bytes[6..8]);
    if (version_major, version_minor) != (2, 4) {
        return Err(PcapError::UnsupportedVersion {
            major: version_major,
            minor: version_minor,
        });
    }
    Ok(PcapHeader {
        magic: u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]),
        version_major,
        version_minor,
        thiszone: e.u32(&bytes[8..12]) as i32,
        sigfigs: e.u32(&bytes[12..16]),
        snaplen: e.u32(&bytes[16..20]),
        linktype: e.u32(&bytes[20..24]),
        byte_order,
        ts_precision,
    })
}

/// Reads into `buf` until it is full or the source is exhausted.
fn read_full<R: Read>(src: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match src.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Streaming reader over a classic pcap byte stream.
pub struct PcapReader<R> {
    inner: R,
    header: PcapHeader,
    records_read: u64,
    done: bool,
}

impl<R: Read> PcapReader<R> {
    pub fn new(mut inner: R) -> Result<Self, PcapError> {
        let mut buf = [0u8; GLOBAL_HEADER_LEN];
        let got = read_full(&mut inner, &mut buf)?;
        if got < 4 {
            return Err(PcapError::ShortHeader { got });
        }
        sniff_magic(&buf[..got])?;
        if got < GLOBAL_HEADER_LEN {
            return Err(PcapError::ShortHeader { got });
        }
        let header = parse_header(&buf)?;
        Ok(PcapReader {
            inner,
            header,
            records_read: 0,
            done: false,
        })
    }

    pub fn header(&self) -> &PcapHeader {
        &self.header
    }

    pub fn records_read(&self) -> u64 {
        self.records_read
    }

    /// Returns the next record, `None` at a clean end of file, or
    /// [`PcapError::TruncatedRecord`] when the file stops mid-record.
    pub fn next_packet(&mut self) -> Result<Option<PacketRecord>, PcapError> {
        if self.done {
            return Ok(None);
        }
        let mut hdr = [0u8; RECORD_HEADER_LEN];
        let got = read_full(&mut self.inner, &mut hdr)?;
        if got == 0 {
            self.done = true;
            return Ok(None);
        }
        if got < RECORD_HEADER_LEN {
            return Err(self.truncated());
        }
        let e = Endian(self.header.byte_order);
        let ts_sec = e.u32(&hdr[0..4]);
        let ts_frac = e.u32(&hdr[4..8]);
        let caplen = e.u32(&hdr[8..12]);
        let origlen = e.u32(&hdr[12..16]);

        // Grow the buffer as bytes arrive so a bogus caplen cannot force a
        // huge allocation up front.
        let mut data = Vec::with_capacity((caplen as usize).min(1 << 16));
        let n = (&mut self.inner).take(u64::from(caplen)).read_to_end(&mut data)?;
        if n < caplen as usize {
            return Err(self.truncated());
        }
        let record = PacketRecord {
            index: self.records_read,
            ts_sec,
            ts_frac,
            caplen,
            origlen,
            data,
        };
        self.records_read += 1;
        Ok(Some(record))
    }

    fn truncated(&mut self) -> PcapError {
        self.done = true;
        PcapError::TruncatedRecord {
            records_read: self.records_read,
        }
    }

    pub fn into_inner(self) -> R {
        self.inner
    }
}

impl<R: Read> Iterator for PcapReader<R> {
    type Item = Result<PacketRecord, PcapError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_packet().transpose()
    }
}

/// Writes a pcap stream record by record.
pub struct PcapWriter<W> {
    inner: W,
    header: PcapHeader,
    written: u64,
    records: u64,
}

impl<W: Write> PcapWriter<W> {
    pub fn new(mut inner: W, header: PcapHeader) -> Result<Self, PcapError> {
        inner.write_all(&header.to_bytes())?;
        Ok(PcapWriter {
            inner,
            header,
            written: GLOBAL_HEADER_LEN as u64,
            records: 0,
        })
    }

    pub fn write_record(&mut self, record: &PacketRecord) -> Result<(), PcapError> {
        if record.caplen > self.header.snaplen {
            return Err(PcapError::RecordViolatesSnaplen {
                index: record.index,
                caplen: record.caplen,
                snaplen: self.header.snaplen,
            });
        }
        if record.data.len() != record.caplen as usize || record.caplen > record.origlen {
            return Err(PcapError::InvalidRecord {
                index: record.index,
                caplen: record.caplen,
                origlen: record.origlen,
                data_len: record.data.len(),
            });
        }
        let e = Endian(self.header.byte_order);
        let mut hdr = [0u8; RECORD_HEADER_LEN];
        e.put_u32(&mut hdr[0..4], record.ts_sec);
        e.put_u32(&mut hdr[4..8], record.ts_frac);
        e.put_u32(&mut hdr[8..12], record.caplen);
        e.put_u32(&mut hdr[12..16], record.origlen);
        self.inner.write_all(&hdr)?;
        self.inner.write_all(&record.data)?;
        self.written += (RECORD_HEADER_LEN + record.data.len()) as u64;
        self.records += 1;
        Ok(())
    }

    pub fn bytes_written(&self) -> u64 {
        self.written
    }

    pub fn records_written(&self) -> u64 {
        self.records
    }

    pub fn finish(mut self) -> Result<W, PcapError> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Writes a whole file and returns the number of bytes emitted.
pub fn write_pcap<'a, W, I>(header: &PcapHeader, packets: I, sink: W) -> Result<u64, PcapError>
where
    W: Write,
    I: IntoIterator<Item = &'a PacketRecord>,
{
    let mut writer = PcapWriter::new(sink, header.clone())?;
    for record in packets {
        writer.write_record(record)?;
    }
    let n = writer.bytes_written();
    writer.finish()?;
    Ok(n)
}

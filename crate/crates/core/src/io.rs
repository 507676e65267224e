//! Wire formats: score streams, ground truth (generic CSV and THUMOS-style
//! per-class text files), video metadata, and proposal output.
//!
//! Every CSV format requires its exact header. Parsing is strict: a bad row
//! is an error carrying the 1-based line number (and the file, when known),
//! never a silently skipped record.

use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::timeline::{
    ClipScore, ClipSpan, GroundTruthSegment, Proposal, TemporalSegment, TimelineError, VideoMeta,
};

pub const SCORES_HEADER: &[&str] = &["video_id", "clip_index", "t_start", "t_end", "score"];
pub const GROUND_TRUTH_HEADER: &[&str] = &["video_id", "t_start", "t_end", "label"];
pub const META_HEADER: &[&str] = &["video_id", "fps", "clip_len", "stride"];
pub const PROPOSALS_HEADER: &[&str] = &[
    "video_id",
    "t_start",
    "t_end",
    "score",
    "first_clip",
    "last_clip",
    "emitted_at_clip",
];

#[derive(Debug, Error)]
pub enum ParseErrorKind {
    #[error("expected header `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("missing header `{0}`")]
    MissingHeader(String),
    #[error("expected {expected} fields, found {found}")]
    FieldCount { expected: usize, found: usize },
    #[error("field `{field}`: cannot parse `{value}`")]
    Field { field: &'static str, value: String },
    #[error(transparent)]
    Value(#[from] TimelineError),
    #[error("video {video_id}: clip index {got} does not follow {previous}")]
    ClipIndexRegression {
        video_id: String,
        previous: u64,
        got: u64,
    },
    #[error("duplicate metadata for video {0}")]
    DuplicateVideo(String),
    #[error("expected `video_name start end`, found {0} fields")]
    AnnotationFields(usize),
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A parse failure with its location.
#[derive(Debug, Error)]
pub struct ParseError {
    pub file: Option<PathBuf>,
    /// 1-based line number, absent for whole-file failures such as open errors.
    pub line: Option<u64>,
    #[source]
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.file, self.line) {
            (Some(file), Some(line)) => write!(f, "{}:{}: {}", file.display(), line, self.kind),
            (Some(file), None) => write!(f, "{}: {}", file.display(), self.kind),
            (None, Some(line)) => write!(f, "line {}: {}", line, self.kind),
            (None, None) => write!(f, "{}", self.kind),
        }
    }
}

impl ParseError {
    fn at(line: u64, kind: impl Into<ParseErrorKind>) -> Self {
        Self {
            file: None,
            line: Some(line),
            kind: kind.into(),
        }
    }

    fn whole_file(path: &Path, err: io::Error) -> Self {
        Self {
            file: Some(path.to_owned()),
            line: None,
            kind: ParseErrorKind::Io(err),
        }
    }

    /// Attaches a file name if none is set yet.
    pub fn in_file(mut self, path: &Path) -> Self {
        if self.file.is_none() {
            self.file = Some(path.to_owned());
        }
        self
    }
}

/// Thin wrapper over a headerless `csv::Reader` that validates the header
/// and hands out records with their line numbers.
struct CsvRows<R> {
    inner: csv::Reader<R>,
    record: csv::StringRecord,
    width: usize,
}

impl<R: Read> CsvRows<R> {
    /// Reads and checks the header. `Ok(None)` for a zero-byte input.
    fn open(reader: R, header: &[&str]) -> Result<Option<Self>, ParseError> {
        let mut inner = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut record = csv::StringRecord::new();
        let got = inner
            .read_record(&mut record)
            .map_err(|e| csv_error(e, 1))?;
        if !got {
            return Ok(None);
        }
        if record.iter().ne(header.iter().copied()) {
            return Err(ParseError::at(
                1,
                ParseErrorKind::Header {
                    expected: header.join(","),
                    found: record.iter().collect::<Vec<_>>().join(","),
                },
            ));
        }
        Ok(Some(Self {
            inner,
            record,
            width: header.len(),
        }))
    }

    /// Advances to the next record, returning its line number.
    fn advance(&mut self) -> Option<Result<u64, ParseError>> {
        let line = self.inner.position().line();
        match self.inner.read_record(&mut self.record) {
            Ok(false) => None,
            Err(e) => Some(Err(csv_error(e, line))),
            Ok(true) => {
                let line = self.record.position().map_or(line, |p| p.line());
                if self.record.len() != self.width {
                    return Some(Err(ParseError::at(
                        line,
                        ParseErrorKind::FieldCount {
                            expected: self.width,
                            found: self.record.len(),
                        },
                    )));
                }
                Some(Ok(line))
            }
        }
    }

    fn field(&self, i: usize) -> &str {
        &self.record[i]
    }
}

fn csv_error(err: csv::Error, fallback_line: u64) -> ParseError {
    let line = err.position().map_or(fallback_line, |p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(e) => ParseError::at(line, ParseErrorKind::Io(e)),
        other => ParseError::at(line, ParseErrorKind::Csv(format!("{other:?}"))),
    }
}

fn parse_num<T: std::str::FromStr>(
    value: &str,
    field: &'static str,
    line: u64,
) -> Result<T, ParseError> {
    value.parse().map_err(|_| {
        ParseError::at(
            line,
            ParseErrorKind::Field {
                field,
                value: value.to_owned(),
            },
        )
    })
}

/// One score row together with the line it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub line: u64,
    pub clip: ClipScore,
}

/// Streaming reader over a score CSV.
///
/// Holds one `u64` per video seen so far (to reject index regressions) and
/// nothing else, so memory does not grow with the number of rows.
pub struct ScoreReader<R> {
    rows: Option<CsvRows<R>>,
    last_index: HashMap<String, u64>,
}

impl<R: Read> ScoreReader<R> {
    pub fn new(reader: R) -> Result<Self, ParseError> {
        Ok(Self {
            rows: CsvRows::open(reader, SCORES_HEADER)?,
            last_index: HashMap::new(),
        })
    }

    fn read_row(rows: &CsvRows<R>, line: u64) -> Result<ClipScore, ParseError> {
        let clip_index = parse_num(rows.field(1), "clip_index", line)?;
        let t_start = parse_num(rows.field(2), "t_start", line)?;
        let t_end = parse_num(rows.field(3), "t_end", line)?;
        let score = parse_num(rows.field(4), "score", line)?;
        ClipScore::new(rows.field(0), clip_index, t_start, t_end, score)
            .map_err(|e| ParseError::at(line, e))
    }
}

impl<R: Read> Iterator for ScoreReader<R> {
    type Item = Result<ScoreRow, ParseError>;

    fn next(&mut self) -> Option<Self::Item> {
        let rows = self.rows.as_mut()?;
        let line = match rows.advance()? {
            Ok(line) => line,
            Err(e) => return Some(Err(e)),
        };
        let clip = match Self::read_row(rows, line) {
            Ok(c) => c,
            Err(e) => return Some(Err(e)),
        };
        match self.last_index.get_mut(&clip.video_id) {
            Some(prev) if clip.clip_index <= *prev => {
                return Some(Err(ParseError::at(
                    line,
                    ParseErrorKind::ClipIndexRegression {
                        video_id: clip.video_id.clone(),
                        previous: *prev,
                        got: clip.clip_index,
                    },
                )));
            }
            Some(prev) => *prev = clip.clip_index,
            None => {
                self.last_index
                    .insert(clip.video_id.clone(), clip.clip_index);
            }
        }
        Some(Ok(ScoreRow { line, clip }))
    }
}

/// All clips of one video, in stream order.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoClips {
    pub video_id: String,
    pub clips: Vec<ClipScore>,
}

/// Reads a whole score CSV, grouping rows by video in order of first appearance.
pub fn parse_scores<R: Read>(reader: R) -> Result<Vec<VideoClips>, ParseError> {
    let mut slots: HashMap<String, usize> = HashMap::new();
    let mut videos: Vec<VideoClips> = Vec::new();
    for row in ScoreReader::new(reader)? {
        let clip = row?.clip;
        let slot = match slots.get(&clip.video_id) {
            Some(&i) => i,
            None => {
                slots.insert(clip.video_id.clone(), videos.len());
                videos.push(VideoClips {
                    video_id: clip.video_id.clone(),
                    clips: Vec::new(),
                });
                videos.len() - 1
            }
        };
        videos[slot].clips.push(clip);
    }
    Ok(videos)
}

pub fn write_scores_csv<'a, W, I>(mut w: W, clips: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a ClipScore>,
{
    writeln!(w, "{}", SCORES_HEADER.join(","))?;
    for c in clips {
        writeln!(
            w,
            "{},{},{},{},{}",
            c.video_id,
            c.clip_index,
            c.segment.start(),
            c.segment.end(),
            c.score()
        )?;
    }
    w.flush()
}

pub fn parse_meta<R: Read>(reader: R) -> Result<Vec<VideoMeta>, ParseError> {
    let Some(mut rows) = CsvRows::open(reader, META_HEADER)? else {
        return Ok(Vec::new());
    };
    let mut seen: HashMap<String, u64> = HashMap::new();
    let mut out = Vec::new();
    while let Some(line) = rows.advance() {
        let line = line?;
        let fps = parse_num(rows.field(1), "fps", line)?;
        let clip_len = parse_num(rows.field(2), "clip_len", line)?;
        let stride = parse_num(rows.field(3), "stride", line)?;
        let meta = VideoMeta::new(rows.field(0), fps, clip_len, stride)
            .map_err(|e| ParseError::at(line, e))?;
        if seen.insert(meta.video_id().to_owned(), line).is_some() {
            return Err(ParseError::at(
                line,
                ParseErrorKind::DuplicateVideo(meta.video_id().to_owned()),
            ));
        }
        out.push(meta);
    }
    Ok(out)
}

pub fn write_meta_csv<'a, W, I>(mut w: W, metas: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a VideoMeta>,
{
    writeln!(w, "{}", META_HEADER.join(","))?;
    for m in metas {
        writeln!(
            w,
            "{},{},{},{}",
            m.video_id(),
            m.fps(),
            m.clip_len(),
            m.stride()
        )?;
    }
    w.flush()
}

/// Generic ground truth: `video_id,t_start,t_end,label` with an optional label.
pub fn parse_ground_truth_csv<R: Read>(reader: R) -> Result<Vec<GroundTruthSegment>, ParseError> {
    let Some(mut rows) = CsvRows::open(reader, GROUND_TRUTH_HEADER)? else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    while let Some(line) = rows.advance() {
        let line = line?;
        let start = parse_num(rows.field(1), "t_start", line)?;
        let end = parse_num(rows.field(2), "t_end", line)?;
        let label = match rows.field(3) {
            "" => None,
            l => Some(l.to_owned()),
        };
        let gt = TemporalSegment::new(start, end)
            .and_then(|s| GroundTruthSegment::new(rows.field(0), s, label))
            .map_err(|e| ParseError::at(line, e))?;
        out.push(gt);
    }
    Ok(out)
}

pub fn write_ground_truth_csv<'a, W, I>(mut w: W, gts: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a GroundTruthSegment>,
{
    writeln!(w, "{}", GROUND_TRUTH_HEADER.join(","))?;
    for g in gts {
        writeln!(
            w,
            "{},{},{},{}",
            g.video_id,
            g.segment.start(),
            g.segment.end(),
            g.label.as_deref().unwrap_or("")
        )?;
    }
    w.flush()
}

/// Parses one THUMOS-style class file: `video_name start end` per line,
/// whitespace separated, blank lines ignored.
pub fn parse_thumos_file<R: Read>(
    reader: R,
    label: &str,
) -> Result<Vec<GroundTruthSegment>, ParseError> {
    let mut text = String::new();
    BufReader::new(reader)
        .read_to_string(&mut text)
        .map_err(|e| ParseError {
            file: None,
            line: None,
            kind: e.into(),
        })?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 3 {
            return Err(ParseError::at(
                line,
                ParseErrorKind::AnnotationFields(fields.len()),
            ));
        }
        let start = parse_num(fields[1], "start", line)?;
        let end = parse_num(fields[2], "end", line)?;
        let gt = TemporalSegment::new(start, end)
            .and_then(|s| GroundTruthSegment::new(fields[0], s, Some(label.to_owned())))
            .map_err(|e| ParseError::at(line, e))?;
        out.push(gt);
    }
    Ok(out)
}

/// Reads every `*.txt` class file in `dir` (sorted by file name); the file
/// stem becomes the label. Overlapping or duplicate instances are kept.
pub fn parse_thumos_annotations(dir: &Path) -> Result<Vec<GroundTruthSegment>, ParseError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| ParseError::whole_file(dir, e))?
        .map(|entry| entry.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(|e| ParseError::whole_file(dir, e))?;
    files.retain(|p| p.is_file() && p.extension().is_some_and(|x| x == "txt"));
    files.sort();

    let mut out = Vec::new();
    for path in files {
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let file = File::open(&path).map_err(|e| ParseError::whole_file(&path, e))?;
        out.extend(parse_thumos_file(file, &label).map_err(|e| e.in_file(&path))?);
    }
    Ok(out)
}

/// Ground truth from either a THUMOS annotation directory or a generic CSV file.
pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruthSegment>, ParseError> {
    if path.is_dir() {
        parse_thumos_annotations(path)
    } else {
        let file = File::open(path).map_err(|e| ParseError::whole_file(path, e))?;
        parse_ground_truth_csv(BufReader::new(file)).map_err(|e| e.in_file(path))
    }
}

/// Writes proposals one at a time, as they are emitted.
pub struct ProposalWriter<W: Write> {
    inner: W,
}

impl<W: Write> ProposalWriter<W> {
    pub fn new(mut inner: W) -> io::Result<Self> {
        writeln!(inner, "{}", PROPOSALS_HEADER.join(","))?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, p: &Proposal) -> io::Result<()> {
        writeln!(
            self.inner,
            "{},{},{},{:.6},{},{},{}",
            p.video_id,
            p.segment.start(),
            p.segment.end(),
            p.score(),
            p.clip_span.first,
            p.clip_span.last,
            p.emitted_at_clip
        )
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

pub fn write_proposals_csv<'a, W, I>(w: W, proposals: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a Proposal>,
{
    let mut writer = ProposalWriter::new(w)?;
    for p in proposals {
        writer.write(p)?;
    }
    writer.finish().map(drop)
}

pub fn parse_proposals_csv<R: Read>(reader: R) -> Result<Vec<Proposal>, ParseError> {
    let Some(mut rows) = CsvRows::open(reader, PROPOSALS_HEADER)? else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    while let Some(line) = rows.advance() {
        let line = line?;
        let start = parse_num(rows.field(1), "t_start", line)?;
        let end = parse_num(rows.field(2), "t_end", line)?;
        let score = parse_num(rows.field(3), "score", line)?;
        let first = parse_num(rows.field(4), "first_clip", line)?;
        let last = parse_num(rows.field(5), "last_clip", line)?;
        let emitted = parse_num(rows.field(6), "emitted_at_clip", line)?;
        let p = TemporalSegment::new(start, end)
            .and_then(|seg| Ok((seg, ClipSpan::new(first, last)?)))
            .and_then(|(seg, span)| Proposal::new(rows.field(0), seg, score, span, emitted))
            .map_err(|e| ParseError::at(line, e))?;
        out.push(p);
    }
    Ok(out)
}

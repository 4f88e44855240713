//! Source file registry and byte-span bookkeeping.

use serde::Serialize;

/// Index of a file registered in a [`SourceMap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct FileId(pub u32);

/// A byte range inside one source file, with the 1-based line/column of its
/// start position precomputed for rendering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Span {
    pub file: FileId,
    pub start: u32,
    pub end: u32,
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn dummy() -> Span {
        Span { file: FileId(0), start: 0, end: 0, line: 1, col: 1 }
    }

    /// Smallest span covering both `self` and `other` (same file).
    pub fn to(self, other: Span) -> Span {
        Span {
            file: self.file,
            start: self.start.min(other.start),
            end: self.end.max(other.end),
            line: self.line.min(other.line),
            col: if other.line < self.line { other.col } else { self.col },
        }
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.file == other.file && self.start <= other.start && other.end <= self.end
    }
}

struct SourceFile {
    name: String,
    text: String,
    /// Byte offset of the first character of each line.
    line_starts: Vec<u32>,
}

/// Owns the text of every file under analysis and resolves offsets to
/// line/column positions.
#[derive(Default)]
pub struct SourceMap {
    files: Vec<SourceFile>,
}

impl SourceMap {
    pub fn new() -> SourceMap {
        SourceMap::default()
    }

    pub fn add_file(&mut self, name: impl Into<String>, text: impl Into<String>) -> FileId {
        let text = text.into();
        let mut line_starts = vec![0u32];
        for (i, b) in text.bytes().enumerate() {
            if b == b'\n' {
                line_starts.push(i as u32 + 1);
            }
        }
        self.files.push(SourceFile { name: name.into(), text, line_starts });
        FileId(self.files.len() as u32 - 1)
    }

    pub fn file_name(&self, id: FileId) -> &str {
        &self.files[id.0 as usize].name
    }

    pub fn text(&self, id: FileId) -> &str {
        &self.files[id.0 as usize].text
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    /// 1-based (line, column) of a byte offset. Columns count bytes, which
    /// matches how the corpus files are written (ASCII).
    pub fn line_col(&self, file: FileId, offset: u32) -> (u32, u32) {
        let f = &self.files[file.0 as usize];
        let line = match f.line_starts.binary_search(&offset) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        (line as u32 + 1, offset - f.line_starts[line] + 1)
    }

    pub fn span(&self, file: FileId, start: u32, end: u32) -> Span {
        debug_assert!(start <= end);
        let (line, col) = self.line_col(file, start);
        Span { file, start, end, line, col }
    }

    /// Span covering the end of a file, used for end-of-input diagnostics.
    pub fn eof_span(&self, file: FileId) -> Span {
        let len = self.text(file).len() as u32;
        self.span(file, len, len)
    }

    pub fn slice(&self, span: Span) -> &str {
        &self.text(span.file)[span.start as usize..span.end as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_col_basics() {
        let mut sm = SourceMap::new();
        let f = sm.add_file("a.v", "ab\ncd\n");
        assert_eq!(sm.line_col(f, 0), (1, 1));
        assert_eq!(sm.line_col(f, 1), (1, 2));
        assert_eq!(sm.line_col(f, 3), (2, 1));
        assert_eq!(sm.line_col(f, 5), (2, 3));
        assert_eq!(sm.line_col(f, 6), (3, 1));
    }

    #[test]
    fn span_invariants() {
        let mut sm = SourceMap::new();
        let f = sm.add_file("a.v", "module m;\nendmodule\n");
        let s = sm.span(f, 10, 19);
        assert!(s.start <= s.end);
        assert!(s.line >= 1 && s.col >= 1);
        assert_eq!(sm.slice(s), "endmodule");
    }
}

use super::rng::fnv1a64;

/// Event trace. The digest is always maintained; the lines are kept only when
/// a dump was requested.
#[derive(Debug, Clone)]
pub struct Trace {
    lines: Option<Vec<String>>,
    digest: u64,
    count: u64,
}

impl Trace {
    pub fn new(keep_lines: bool) -> Self {
        Trace {
            lines: keep_lines.then(Vec::new),
            digest: fnv1a64(b""),
            count: 0,
        }
    }

    /// Appends one line. Fields are `time_ns,seq,kind,subjects...`.
    pub fn record(&mut self, line: String) {
        // Chain the line hash so order matters.
        let h = fnv1a64(line.as_bytes());
        self.digest = fnv1a64(&[self.digest.to_le_bytes(), h.to_le_bytes()].concat());
        self.count += 1;
        if let Some(lines) = &mut self.lines {
            lines.push(line);
        }
    }

    pub fn digest(&self) -> u64 {
        self.digest
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn lines(&self) -> Option<&[String]> {
        self.lines.as_deref()
    }

    pub fn into_lines(self) -> Option<Vec<String>> {
        self.lines
    }
}

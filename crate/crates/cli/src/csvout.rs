//! Small deterministic CSV writer: fixed column order, `{}` float formatting
//! (shortest round-trip), no quoting surprises.

pub struct Csv {
    buf: String,
    cols: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut c = Csv {
            buf: String::new(),
            cols: header.len(),
        };
        c.row(header);
        c
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) {
        assert_eq!(fields.len(), self.cols, "csv row width");
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            let f = f.as_ref();
            if f.contains(',') || f.contains('"') || f.contains('\n') {
                self.buf.push('"');
                self.buf.push_str(&f.replace('"', "\"\""));
                self.buf.push('"');
            } else {
                self.buf.push_str(f);
            }
        }
        self.buf.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf.into_bytes()
    }
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

//! Result tables and their CSV form.

use std::io::Write;

use mixpred::Check;

/// A named table of preformatted cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Deterministic text form of a cell. Floats use the shortest round-trip form.
pub trait Cell {
    fn cell(&self) -> String;
}

macro_rules! display_cell {
    ($($t:ty),*) => {
        $(impl Cell for $t {
            fn cell(&self) -> String {
                self.to_string()
            }
        })*
    };
}

display_cell!(f64, usize, u64, u32, i64, bool, str, String);

impl<T: Cell + ?Sized> Cell for &T {
    fn cell(&self) -> String {
        (**self).cell()
    }
}

impl<T: Cell> Cell for Option<T> {
    fn cell(&self) -> String {
        self.as_ref().map_or_else(String::new, Cell::cell)
    }
}

#[macro_export]
macro_rules! row {
    ($($v:expr),* $(,)?) => {
        vec![$($crate::table::Cell::cell(&$v)),*]
    };
}

impl Table {
    #[must_use]
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| (*s).to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width differs from header in table {}", self.name);
        self.rows.push(row);
    }

    #[must_use]
    pub fn verdicts(checks: &[Check]) -> Self {
        let mut t = Self::new("verdict", &["check_id", "lhs", "rhs", "tolerance", "verdict"]);
        for c in checks {
            t.push(row![c.id, c.lhs, c.rhs, c.tolerance, c.verdict()]);
        }
        t
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    #[must_use]
    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("cells are UTF-8")
    }
}

//! Fixed-format output shared by every CSV writer.

use std::fs;
use std::io;
use std::path::Path;

/// 17 significant digits, so the text round-trips to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `contents` to `path` through a sibling temporary file and a rename,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

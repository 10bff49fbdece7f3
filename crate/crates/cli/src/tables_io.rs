//! Versioned text format for decode tables.
//!
//! ```text
//! ionstrobe-decode-tables 1
//! config_key <sha256>
//! phi0_ref_rad <value>
//! contrast_ref <value>
//! pos <X_m> <phi0_rel_rad>
//! mom <P_kg_m_per_s> <contrast>
//! ```
//!
//! Values use the shortest exact decimal form, so a reloaded table decodes
//! bit-identically to the one that was built. Lines starting with `#` are
//! comments.

use ionstrobe_core::calib::DecodeTables;

pub const MAGIC: &str = "ionstrobe-decode-tables";
pub const VERSION: u32 = 1;

pub fn write_tables(tables: &DecodeTables, key: &str) -> String {
    let mut out = format!("{MAGIC} {VERSION}\nconfig_key {key}\n");
    out.push_str(&format!("phi0_ref_rad {:e}\n", tables.phi0_ref));
    out.push_str(&format!("contrast_ref {:e}\n", tables.contrast_ref));
    out.push_str("# pos X_m phi0_rel_rad\n");
    for (x, p) in tables.pos_nodes() {
        out.push_str(&format!("pos {x:e} {p:e}\n"));
    }
    out.push_str("# mom P_kg_m_per_s contrast\n");
    for (p, c) in tables.mom_nodes() {
        out.push_str(&format!("mom {p:e} {c:e}\n"));
    }
    out
}

/// Returns the tables and the stored config key.
pub fn read_tables(text: &str) -> Result<(DecodeTables, String), String> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let first = lines.next().ok_or("empty tables file")?;
    let mut magic = first.split_whitespace();
    if magic.next() != Some(MAGIC) {
        return Err("not a decode tables file".into());
    }
    let version: u32 = magic
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or("missing format version")?;
    if version != VERSION {
        return Err(format!("unsupported tables format version {version}"));
    }
    let mut key = None;
    let mut phi0 = None;
    let mut c_ref = None;
    let mut pos = Vec::new();
    let mut mom = Vec::new();
    for line in lines {
        let cells: Vec<&str> = line.split_whitespace().collect();
        let num = |i: usize| -> Result<f64, String> {
            cells
                .get(i)
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| format!("bad line `{line}`"))
        };
        match cells[0] {
            "config_key" => key = cells.get(1).map(|s| s.to_string()),
            "phi0_ref_rad" => phi0 = Some(num(1)?),
            "contrast_ref" => c_ref = Some(num(1)?),
            "pos" => pos.push((num(1)?, num(2)?)),
            "mom" => mom.push((num(1)?, num(2)?)),
            other => return Err(format!("unknown record `{other}`")),
        }
    }
    let tables = DecodeTables::from_nodes(
        phi0.ok_or("missing phi0_ref_rad")?,
        c_ref.ok_or("missing contrast_ref")?,
        pos,
        mom,
    )
    .map_err(|e| e.to_string())?;
    Ok((tables, key.ok_or("missing config_key")?))
}

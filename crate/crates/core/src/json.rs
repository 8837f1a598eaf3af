//! Canonical JSON: object keys in lexicographic order, stable formatting.

use serde::Serialize;

/// Pretty-printed canonical JSON with a trailing newline.
pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    // serde_json::Value uses a BTreeMap for objects, so keys come out sorted.
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// Single-line canonical JSON, as used for one record per line.
pub fn to_canonical_line<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let v = serde_json::to_value(value)?;
    serde_json::to_string(&v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct S {
        zeta: u8,
        alpha: u8,
    }

    #[test]
    fn keys_are_sorted() {
        assert_eq!(to_canonical_line(&S { zeta: 1, alpha: 2 }).unwrap(), r#"{"alpha":2,"zeta":1}"#);
        assert!(to_canonical_string(&S { zeta: 1, alpha: 2 }).unwrap().ends_with("}\n"));
    }
}

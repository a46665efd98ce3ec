//! Small canonical JSON layout helpers: stable key order, one entry per line.

pub(crate) fn string(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization cannot fail")
}

pub(crate) fn string_array<S: AsRef<str>>(items: &[S]) -> String {
    let inner: Vec<String> = items.iter().map(|s| string(s.as_ref())).collect();
    format!("[{}]", inner.join(", "))
}

/// Array with one element per line; elements are pre-rendered.
pub(crate) fn block_array(items: &[String]) -> String {
    if items.is_empty() {
        return "[]".into();
    }
    let mut out = String::from("[\n");
    for (i, item) in items.iter().enumerate() {
        out.push_str("    ");
        out.push_str(item);
        if i + 1 < items.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("  ]");
    out
}

/// Object with one member per line; values are pre-rendered.
pub(crate) fn block_object(members: &[(String, String)]) -> String {
    if members.is_empty() {
        return "{}".into();
    }
    let mut out = String::from("{\n");
    for (i, (k, v)) in members.iter().enumerate() {
        out.push_str("    ");
        out.push_str(&string(k));
        out.push_str(": ");
        out.push_str(v);
        if i + 1 < members.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("  }");
    out
}

/// Top-level document from `(key, rendered value)` sections.
pub(crate) fn document(sections: &[(&str, String)]) -> String {
    let mut out = String::from("{\n");
    for (i, (k, v)) in sections.iter().enumerate() {
        out.push_str("  ");
        out.push_str(&string(k));
        out.push_str(": ");
        out.push_str(v);
        if i + 1 < sections.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("}\n");
    out
}

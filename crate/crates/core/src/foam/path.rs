use super::{Dict, FoamError, FoamFile, FoamValue};

fn segments(path: &str) -> Result<Vec<&str>, FoamError> {
    let segs: Vec<&str> = path.split('/').filter(|s| !s.is_empty()).collect();
    if segs.is_empty() {
        return Err(FoamError::EmptyPath);
    }
    Ok(segs)
}

/// Value at a slash-separated keyword path, e.g. `boundaryField/movingWall/type`.
pub fn get_entry<'f>(file: &'f FoamFile, path: &str) -> Result<&'f FoamValue, FoamError> {
    let segs = segments(path)?;
    let mut dict: &Dict = &file.body;
    for (i, seg) in segs.iter().enumerate() {
        let value = dict
            .lookup(seg)
            .ok_or_else(|| FoamError::NotFound(path.to_string()))?;
        if i + 1 == segs.len() {
            return Ok(value);
        }
        dict = value
            .as_dict()
            .ok_or_else(|| FoamError::NotADict(segs[..=i].join("/")))?;
    }
    unreachable!()
}

/// Copy of `file` with the value at `path` replaced or inserted. Missing
/// intermediate dictionaries are created; existing key order is kept.
pub fn set_entry(file: &FoamFile, path: &str, value: FoamValue) -> Result<FoamFile, FoamError> {
    let mut out = file.clone();
    set_in_place(&mut out.body, path, value)?;
    Ok(out)
}

pub(crate) fn set_in_place(body: &mut Dict, path: &str, value: FoamValue) -> Result<(), FoamError> {
    let segs = segments(path)?;
    let (last, parents) = segs.split_last().unwrap();
    let mut dict = body;
    for (i, seg) in parents.iter().enumerate() {
        if dict.lookup(seg).is_none() {
            dict.insert(*seg, FoamValue::Dict(Dict::new()));
        }
        dict = match dict.lookup_mut(seg).unwrap() {
            FoamValue::Dict(d) | FoamValue::Keyed { dict: d, .. } => d,
            _ => return Err(FoamError::NotADict(segs[..=i].join("/"))),
        };
    }
    // a named dictionary inside a list keeps its name when replaced by a dict
    let keyed = matches!(dict.lookup(last), Some(FoamValue::Keyed { .. }));
    match (dict.lookup_mut(last), value) {
        (Some(FoamValue::Keyed { dict: slot, .. }), FoamValue::Dict(d)) if keyed => *slot = d,
        (Some(slot), v) => *slot = v,
        (None, v) => dict.insert(*last, v),
    }
    Ok(())
}

use serde_json::{json, Map, Value};

use super::geometry::{Geometry, Point, Polygon};
use super::FeatureError;

/// A feature as read from a FeatureCollection, before projection.
pub(crate) struct RawFeature {
    pub id: String,
    pub geometry: Geometry,
}

pub(crate) fn parse_feature_collection(
    text: &str,
    id_property: &str,
) -> Result<Vec<Result<RawFeature, FeatureError>>, String> {
    let doc: Value = serde_json::from_str(text).map_err(|e| format!("invalid JSON: {e}"))?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err("top-level object is not a FeatureCollection".into());
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or("FeatureCollection has no `features` array")?;
    Ok(features
        .iter()
        .enumerate()
        .map(|(index, f)| parse_feature(index, f, id_property))
        .collect())
}

fn parse_feature(index: usize, f: &Value, id_property: &str) -> Result<RawFeature, FeatureError> {
    let fail = |id: Option<String>, message: String| FeatureError { index, id, message };
    let id = match f.get("properties").and_then(|p| p.get(id_property)) {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => return Err(fail(None, format!("missing `{id_property}` property"))),
    };
    let geometry = f
        .get("geometry")
        .ok_or_else(|| fail(Some(id.clone()), "missing geometry".into()))?;
    let geometry = parse_geometry(geometry).map_err(|m| fail(Some(id.clone()), m))?;
    geometry
        .validate()
        .map_err(|m| fail(Some(id.clone()), m))?;
    Ok(RawFeature { id, geometry })
}

fn parse_geometry(g: &Value) -> Result<Geometry, String> {
    let kind = g.get("type").and_then(Value::as_str).unwrap_or("");
    let coords = g.get("coordinates").ok_or("geometry has no coordinates")?;
    match kind {
        "Polygon" => Ok(Geometry {
            polygons: vec![parse_polygon(coords)?],
        }),
        "MultiPolygon" => {
            let parts = coords.as_array().ok_or("MultiPolygon coordinates not an array")?;
            let polygons = parts.iter().map(parse_polygon).collect::<Result<Vec<_>, _>>()?;
            Ok(Geometry { polygons })
        }
        other => Err(format!("unsupported geometry type `{other}`")),
    }
}

fn parse_polygon(v: &Value) -> Result<Polygon, String> {
    let rings = v.as_array().ok_or("polygon coordinates not an array")?;
    let mut parsed = rings.iter().map(parse_ring);
    let exterior = parsed.next().ok_or("polygon has no rings")??;
    let holes = parsed.collect::<Result<Vec<_>, _>>()?;
    Ok(Polygon { exterior, holes })
}

fn parse_ring(v: &Value) -> Result<Vec<Point>, String> {
    let positions = v.as_array().ok_or("ring not an array")?;
    let mut ring = positions
        .iter()
        .map(|p| {
            let a = p.as_array().ok_or("position not an array")?;
            match (a.first().and_then(Value::as_f64), a.get(1).and_then(Value::as_f64)) {
                (Some(x), Some(y)) => Ok([x, y]),
                _ => Err("position needs two numbers".to_string()),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    if ring.len() >= 2 && ring.first() == ring.last() {
        ring.pop();
    }
    Ok(ring)
}

fn ring_value(ring: &[Point]) -> Value {
    let mut coords: Vec<Value> = ring.iter().map(|p| json!([p[0], p[1]])).collect();
    if let Some(first) = ring.first() {
        coords.push(json!([first[0], first[1]]));
    }
    Value::Array(coords)
}

fn polygon_value(p: &Polygon) -> Value {
    Value::Array(p.rings().map(|r| ring_value(r)).collect())
}

pub(crate) fn geometry_value(g: &Geometry) -> Value {
    if g.polygons.len() == 1 {
        json!({ "type": "Polygon", "coordinates": polygon_value(&g.polygons[0]) })
    } else {
        json!({
            "type": "MultiPolygon",
            "coordinates": g.polygons.iter().map(polygon_value).collect::<Vec<_>>()
        })
    }
}

pub(crate) fn feature_collection<'a>(
    features: impl Iterator<Item = (&'a str, &'a Geometry, Map<String, Value>)>,
    id_property: &str,
) -> Value {
    let features: Vec<Value> = features
        .map(|(id, g, mut props)| {
            props.insert(id_property.to_string(), Value::String(id.to_string()));
            json!({ "type": "Feature", "properties": props, "geometry": geometry_value(g) })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}

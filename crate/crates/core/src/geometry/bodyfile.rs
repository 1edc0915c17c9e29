//! Text description of convex bodies (TOML).
//!
//! ```toml
//! kind = "vpolytope"          # vpolytope | hpolytope | ball | ballcut
//! vertices = [[0, 0], [1, 0], [0, 1]]
//! outer_radius = 0.25          # optional, default 0
//! ```
//!
//! `hpolytope` and `ballcut` take `halfspaces = [{ normal = [..], offset = b }, ..]`
//! describing `normal . x <= offset`; normals are rescaled to unit length
//! (with the offset). `ball` and `ballcut` take `center` and `radius`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::body::{BodyKind, ConvexBody, HalfSpace};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halfspaces: Option<Vec<HalfSpaceSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default)]
    pub outer_radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfSpaceSpec {
    pub normal: Vec<f64>,
    pub offset: f64,
}

fn missing(field: &str, kind: &str) -> Error {
    Error::Config(format!("`{field}` is required for kind `{kind}`"))
}

impl BodySpec {
    pub fn build(&self) -> Result<ConvexBody> {
        let halfspaces = || -> Result<Vec<HalfSpace>> {
            self.halfspaces
                .as_ref()
                .ok_or_else(|| missing("halfspaces", &self.kind))?
                .iter()
                .map(|h| HalfSpace::normalized(&h.normal, h.offset))
                .collect()
        };
        let center = || {
            self.center
                .clone()
                .ok_or_else(|| missing("center", &self.kind))
        };
        let radius = || self.radius.ok_or_else(|| missing("radius", &self.kind));
        let body = match self.kind.as_str() {
            "vpolytope" => ConvexBody::vpolytope(
                self.vertices
                    .clone()
                    .ok_or_else(|| missing("vertices", &self.kind))?,
            )?,
            "hpolytope" => ConvexBody::hpolytope(halfspaces()?)?,
            "ball" => ConvexBody::ball(center()?, radius()?)?,
            "ballcut" => ConvexBody::ball_cut(center()?, radius()?, halfspaces()?)?,
            other => return Err(Error::Config(format!("unknown body kind `{other}`"))),
        };
        body.with_outer_radius(self.outer_radius)
    }

    pub fn from_body(body: &ConvexBody) -> Self {
        let hs = |v: &[HalfSpace]| {
            Some(
                v.iter()
                    .map(|h| HalfSpaceSpec {
                        normal: h.normal.clone(),
                        offset: h.offset,
                    })
                    .collect(),
            )
        };
        let mut spec = Self {
            kind: String::new(),
            vertices: None,
            halfspaces: None,
            center: None,
            radius: None,
            outer_radius: body.outer_radius(),
        };
        match body.kind() {
            BodyKind::VPolytope { vertices } => {
                spec.kind = "vpolytope".into();
                spec.vertices = Some(vertices.clone());
            }
            BodyKind::HPolytope { halfspaces } => {
                spec.kind = "hpolytope".into();
                spec.halfspaces = hs(halfspaces);
            }
            BodyKind::Ball { center, radius } => {
                spec.kind = "ball".into();
                spec.center = Some(center.clone());
                spec.radius = Some(*radius);
            }
            BodyKind::BallCut {
                center,
                radius,
                halfspaces,
            } => {
                spec.kind = "ballcut".into();
                spec.center = Some(center.clone());
                spec.radius = Some(*radius);
                spec.halfspaces = hs(halfspaces);
            }
        }
        spec
    }
}

pub fn parse_body(text: &str) -> Result<ConvexBody> {
    let spec: BodySpec = toml::from_str(text).map_err(|e| Error::Parse {
        line: e
            .span()
            .map(|s| text[..s.start].lines().count().max(1))
            .unwrap_or(0),
        msg: e.message().to_string(),
    })?;
    spec.build()
}

pub fn read_body(path: &std::path::Path) -> Result<ConvexBody> {
    parse_body(&std::fs::read_to_string(path)?)
}

pub fn body_to_string(body: &ConvexBody) -> String {
    toml::to_string(&BodySpec::from_body(body)).expect("body spec serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_kind() {
        let v =
            parse_body("kind = \"vpolytope\"\nvertices = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]\n")
                .unwrap();
        assert_eq!(v.dim(), 2);
        let h = parse_body(
            "kind = \"hpolytope\"\nhalfspaces = [\n { normal = [2.0, 0.0], offset = 2.0 },\n { normal = [-1.0, 0.0], offset = 0.0 },\n { normal = [0.0, 1.0], offset = 1.0 },\n { normal = [0.0, -1.0], offset = 0.0 },\n]\n",
        )
        .unwrap();
        assert!((h.support_function(&[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        let b = parse_body(
            "kind = \"ball\"\ncenter = [0.0, 0.0, 0.0]\nradius = 0.1\nouter_radius = 0.2\n",
        )
        .unwrap();
        assert!((b.support_function(&[0.0, 0.0, 1.0]).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn decimal_values_round_correctly() {
        let b = parse_body("kind = \"ball\"\ncenter = [0.1, 0.7]\nradius = 0.3\n").unwrap();
        let BodyKind::Ball { center, radius } = b.kind() else {
            panic!()
        };
        assert_eq!(center[0], 0.1);
        assert_eq!(center[1], 0.7);
        assert_eq!(*radius, 0.3);
    }

    #[test]
    fn round_trip() {
        let b = ConvexBody::unit_cube(3)
            .unwrap()
            .with_outer_radius(0.125)
            .unwrap();
        let again = parse_body(&body_to_string(&b)).unwrap();
        assert_eq!(again, b);
    }

    #[test]
    fn errors_are_reported() {
        assert!(matches!(
            parse_body("kind = \"ball\"\nradius = 1.0\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            parse_body("kind = \"blob\"\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(parse_body("kind = \n"), Err(Error::Parse { .. })));
    }
}

//! Two-dimensional projections of a document-term matrix.

mod pca;
pub mod svg;
mod tsne;

pub use pca::{pca_2d, principal_components, Pca, PCA_MAX_ITER, PCA_TOL};
pub use tsne::{
    conditional_probabilities, joint_probabilities, pairwise_sq_distances, row_perplexity, tsne_2d, TsneOutput,
    TsneParams,
};

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::csv::write_record;
use crate::error::{Error, Result};
use svg::{Scale, Svg, PALETTE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMethod {
    Pca,
    Tsne,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    pub coords: Vec<[f64; 2]>,
    pub labels: Vec<String>,
    pub method: ProjectionMethod,
    pub params: BTreeMap<String, f64>,
}

impl Projection2D {
    pub fn new(
        coords: Vec<[f64; 2]>,
        labels: Vec<String>,
        method: ProjectionMethod,
        params: BTreeMap<String, f64>,
    ) -> Result<Self> {
        if coords.len() != labels.len() {
            return Err(Error::dim(format!("{} points but {} labels", coords.len(), labels.len())));
        }
        if coords.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("projection produced a non-finite coordinate".into()));
        }
        Ok(Self { coords, labels, method, params })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        write_record(&mut out, &["x", "y", "label"]);
        for (c, l) in self.coords.iter().zip(&self.labels) {
            write_record(&mut out, &[format!("{:?}", c[0]), format!("{:?}", c[1]), l.clone()]);
        }
        out
    }

    /// Scatter with one colour per distinct label and a legend.
    pub fn to_svg(&self) -> String {
        let (w, h, m) = (640.0, 520.0, 40.0);
        let legend_w = 140.0;
        let xs = Scale::fit(self.coords.iter().map(|c| &c[0]), m, w - m - legend_w);
        let ys = Scale::fit(self.coords.iter().map(|c| &c[1]), h - m, m);
        let mut classes: Vec<&str> = self.labels.iter().map(String::as_str).collect();
        classes.sort_unstable();
        classes.dedup();
        let colour = |l: &str| PALETTE[classes.binary_search(&l).unwrap_or(0) % PALETTE.len()];

        let mut s = Svg::new(w, h);
        let title = match self.method {
            ProjectionMethod::Pca => "PCA",
            ProjectionMethod::Tsne => "t-SNE",
        };
        s.text(w / 2.0, 20.0, "middle", title);
        s.rect(m, m, w - 2.0 * m - legend_w, h - 2.0 * m, "none", "#999999");
        for (c, l) in self.coords.iter().zip(&self.labels) {
            s.circle(xs.map(c[0]), ys.map(c[1]), 3.0, colour(l));
        }
        for (i, l) in classes.iter().enumerate() {
            let y = m + 10.0 + 20.0 * i as f64;
            s.rect(w - legend_w + 10.0, y - 9.0, 10.0, 10.0, colour(l), "none");
            s.text(w - legend_w + 26.0, y, "start", l);
        }
        s.finish()
    }

    /// Writes `<stem>.csv` and `<stem>.svg` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.csv")), self.to_csv())?;
        std::fs::write(dir.join(format!("{stem}.svg")), self.to_svg())?;
        Ok(())
    }
}

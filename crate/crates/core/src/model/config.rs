use crate::error::{Error, Result};

/// Switches that remove parts of the pipeline for ablation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Ablation {
    /// Use the primary patch as its own adjacent patch.
    pub no_pacm_pairs: bool,
    /// Skip offset refinement, so the refined output equals the coarse one.
    pub no_pocm: bool,
    /// Replace both position codes by the bare neighbor coordinates.
    pub raw_coordinate_codes: bool,
}

/// Network dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpsamplerConfig {
    /// Points per input patch.
    pub n: usize,
    /// Upsampling rate.
    pub r: usize,
    /// Neighbor count for every KNN grouping.
    pub k: usize,
    /// Feature width after extraction.
    pub c: usize,
    /// Feature width of each expanded point.
    pub c_up: usize,
    /// Number of dense edge-convolution blocks in the extractor.
    pub extractor_depth: usize,
    /// Hidden width of the coordinate and offset heads.
    pub head_hidden: usize,
    /// Add each input point to its `r` coarse outputs, so the coordinate
    /// head predicts displacements rather than absolute positions.
    pub coarse_skip: bool,
    pub ablation: Ablation,
}

impl Default for UpsamplerConfig {
    fn default() -> Self {
        Self {
            n: 64,
            r: 4,
            k: 16,
            c: 32,
            c_up: 32,
            extractor_depth: 3,
            head_hidden: 64,
            coarse_skip: true,
            ablation: Ablation::default(),
        }
    }
}

impl UpsamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n", self.n),
            ("r", self.r),
            ("k", self.k),
            ("c", self.c),
            ("c_up", self.c_up),
            ("extractor_depth", self.extractor_depth),
            ("head_hidden", self.head_hidden),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.k > self.n {
            return Err(Error::Config(format!("k = {} exceeds patch size n = {}", self.k, self.n)));
        }
        Ok(())
    }

    pub fn output_points(&self) -> usize {
        self.r * self.n
    }

    /// Width of the cross-patch position code.
    pub fn spne_width(&self) -> usize {
        if self.ablation.raw_coordinate_codes {
            3
        } else {
            super::SPNE_WIDTH
        }
    }

    /// Width of the single-cloud position code.
    pub fn lse_width(&self) -> usize {
        if self.ablation.raw_coordinate_codes {
            3
        } else {
            super::LSE_WIDTH
        }
    }
}

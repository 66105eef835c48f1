//! Parameter and FLOP audit.
//!
//! Counts are exact closed forms per layer: a K×K convolution over C input
//! channels producing F maps of H′×W′ costs K²·C·F·H′·W′ multiply-accumulates,
//! a depthwise layer K²·C·H′·W′, a pointwise layer C·M·H′·W′, and a dense
//! layer D·M. One MAC is two FLOPs; activations, pooling, and softmax are
//! excluded. The fitted CCA projections are constants, so their rows carry
//! compute but zero parameters.

use super::{FusionKind, ModelConfig, ModelError};
use serde::Serialize;
use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LayerCost {
    pub name: String,
    pub params: usize,
    pub macs: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FlopsReport {
    pub layers: Vec<LayerCost>,
    pub total_params: usize,
    pub total_macs: u64,
    pub total_flops: u64,
}

impl FlopsReport {
    /// CSV with one row per layer plus a `total` row; FLOPs = 2·MACs.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,params,macs,flops\n");
        for l in &self.layers {
            writeln!(out, "{},{},{},{}", l.name, l.params, l.macs, 2 * l.macs).unwrap();
        }
        writeln!(out, "total,{},{},{}", self.total_params, self.total_macs, self.total_flops)
            .unwrap();
        out
    }
}

/// Audits every parameterized layer of `config`, in registry order.
pub fn count_flops(config: &ModelConfig) -> Result<FlopsReport, ModelError> {
    let stages = config.stages()?;
    let mut layers = Vec::new();
    let mut push = |name: String, params: usize, macs: u64| {
        layers.push(LayerCost { name, params, macs });
    };

    let f = config.stem_filters;
    let [sh, sw, _] = stages.stem_out;
    let stem_pixels = (sh * sw) as u64;
    push("stem.conv3".into(), 9 * f + f, 9 * f as u64 * stem_pixels);
    push("stem.conv5".into(), 25 * f + f, 25 * f as u64 * stem_pixels);

    let mut c_in = 2 * f;
    for (i, block) in config.trunk.iter().enumerate() {
        let [h, w, c_out] = stages.block_out[i];
        let pixels = (h * w) as u64;
        push(format!("block{}.dw", i + 1), 9 * c_in, 9 * c_in as u64 * pixels);
        push(
            format!("block{}.pw", i + 1),
            c_in * c_out + c_out,
            (c_in * c_out) as u64 * pixels,
        );
        c_in = block.out_channels;
    }

    let mh = config.meta_hidden;
    push("meta.dense".into(), 2 * mh + mh, 2 * mh as u64);

    let d1 = config.image_embedding_dim()?;
    let d2 = config.meta_embedding_dim();
    let n = config.latent_dim;
    match config.fusion {
        FusionKind::Concat => {}
        FusionKind::Sacc => {
            push("sacc.img_proj".into(), d1 * n + n, (d1 * n) as u64);
            push("sacc.pat_proj".into(), d2 * n + n, (d2 * n) as u64);
            push("sacc.attention".into(), 2 * n, 0);
            push("sacc.fuse".into(), 2 * n * n + n, (2 * n * n) as u64);
        }
        FusionKind::Cca => {
            let k = d1.min(d2);
            push("fusion.cca.x_proj".into(), 0, (d1 * k) as u64);
            push("fusion.cca.y_proj".into(), 0, (d2 * k) as u64);
        }
    }

    let mut in_dim = config.fused_dim()?;
    for (i, &width) in config.head_dims.iter().enumerate() {
        push(format!("head.fc{}", i + 1), in_dim * width + width, (in_dim * width) as u64);
        in_dim = width;
    }
    let c = config.num_classes();
    push("head.out".into(), in_dim * c + c, (in_dim * c) as u64);

    let total_params = layers.iter().map(|l| l.params).sum();
    let total_macs = layers.iter().map(|l| l.macs).sum();
    Ok(FlopsReport { layers, total_params, total_macs, total_flops: 2 * total_macs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::preprocess::ClassScheme;
    use crate::rng::Rng;

    fn report(fusion: FusionKind) -> FlopsReport {
        count_flops(&ModelConfig::small(ClassScheme::Mitbih10, fusion)).unwrap()
    }

    fn layer<'r>(r: &'r FlopsReport, name: &str) -> &'r LayerCost {
        r.layers.iter().find(|l| l.name == name).unwrap_or_else(|| panic!("no layer {name}"))
    }

    #[test]
    fn totals_equal_the_sum_of_parts() {
        for fusion in [FusionKind::Concat, FusionKind::Cca, FusionKind::Sacc] {
            let r = report(fusion);
            assert_eq!(r.total_params, r.layers.iter().map(|l| l.params).sum::<usize>());
            assert_eq!(r.total_macs, r.layers.iter().map(|l| l.macs).sum::<u64>());
            assert_eq!(r.total_flops, 2 * r.total_macs);
        }
    }

    #[test]
    fn audit_agrees_with_the_live_registry() {
        for fusion in [FusionKind::Concat, FusionKind::Cca, FusionKind::Sacc] {
            let config = ModelConfig::small(ClassScheme::Mitbih10, fusion);
            let params = ModelParams::<f32>::build(&config, &mut Rng::new(0)).unwrap();
            assert_eq!(
                count_flops(&config).unwrap().total_params,
                params.count_params(),
                "{}",
                fusion.name()
            );
        }
    }

    #[test]
    fn closed_form_examples() {
        let r = report(FusionKind::Sacc);
        assert_eq!(layer(&r, "stem.conv3").macs, 1_179_648); // 9·32·64·64
        assert_eq!(layer(&r, "stem.conv3").params, 320);
        assert_eq!(layer(&r, "head.fc1").macs, 32_768); // 256·128
        assert_eq!(layer(&r, "head.fc1").params, 32_896);
        assert_eq!(layer(&r, "meta.dense").params, 24);
        assert_eq!(layer(&r, "sacc.attention").params, 512);
        assert_eq!(layer(&r, "sacc.attention").macs, 0);
        assert_eq!(layer(&r, "block1.pw").macs, 16_777_216); // 64·64·64·64
    }

    #[test]
    fn default_model_budget_is_frozen() {
        let r = report(FusionKind::Sacc);
        assert_eq!(r.total_params, 445_090);
        assert_eq!(r.total_macs, 40_829_072);
        assert_eq!(r.total_flops, 81_658_144);
    }

    #[test]
    fn csv_has_a_row_per_layer_plus_total() {
        let r = report(FusionKind::Sacc);
        let csv = r.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "layer,params,macs,flops");
        assert_eq!(lines.len(), r.layers.len() + 2);
        assert_eq!(*lines.last().unwrap(), "total,445090,40829072,81658144");
    }

    #[test]
    fn cca_projections_cost_compute_but_no_parameters() {
        let r = report(FusionKind::Cca);
        assert_eq!(layer(&r, "fusion.cca.x_proj").params, 0);
        assert_eq!(layer(&r, "fusion.cca.x_proj").macs, 2560); // 256·10
        assert_eq!(layer(&r, "head.fc1").params, 20 * 128 + 128);
    }
}

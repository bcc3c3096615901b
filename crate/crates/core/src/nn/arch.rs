use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn one() -> usize {
    1
}
fn three() -> usize {
    3
}
fn two() -> usize {
    2
}

/// One VGG-style block: `convs` 3x3 same-padded convolutions, each followed by ReLU, then a 2x2 max-pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvBlock {
    pub conv_filters: usize,
    #[serde(default = "one")]
    pub convs: usize,
    #[serde(default = "three")]
    pub conv_kernel: usize,
    #[serde(default = "one")]
    pub conv_stride: usize,
    #[serde(default = "two")]
    pub pool: usize,
}

impl ConvBlock {
    pub fn new(conv_filters: usize) -> Self {
        Self { conv_filters, convs: 1, conv_kernel: 3, conv_stride: 1, pool: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchSpec {
    /// `[height, width]` in pixels.
    pub input_size: [usize; 2],
    #[serde(default = "one")]
    pub input_channels: usize,
    pub blocks: Vec<ConvBlock>,
    /// Widths of the fully connected layers, the last one being `num_classes`.
    pub fc_widths: Vec<usize>,
    pub num_classes: usize,
}

/// One step of the compiled network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Conv { cin: usize, cout: usize, h: usize, w: usize, weight: usize },
    Relu { len: usize },
    Pool { c: usize, h: usize, w: usize },
    Dense { inp: usize, out: usize, weight: usize },
}

impl Layer {
    pub fn name(&self, index: usize) -> String {
        match self {
            Layer::Conv { .. } => format!("conv#{index}"),
            Layer::Relu { .. } => format!("relu#{index}"),
            Layer::Pool { .. } => format!("pool#{index}"),
            Layer::Dense { .. } => format!("dense#{index}"),
        }
    }
}

impl ArchSpec {
    /// Three blocks of 16/32/64 filters and a 128-wide hidden layer.
    pub fn mini_vgg(num_classes: usize, input: usize) -> Self {
        Self {
            input_size: [input, input],
            input_channels: 1,
            blocks: [16, 32, 64].into_iter().map(ConvBlock::new).collect(),
            fc_widths: vec![128, num_classes],
            num_classes,
        }
    }

    /// Full VGG16 layout (13 convolutions, 5 pools, 3 dense layers) at 224x224.
    pub fn vgg16(num_classes: usize) -> Self {
        let block = |f, convs| ConvBlock { convs, ..ConvBlock::new(f) };
        Self {
            input_size: [224, 224],
            input_channels: 1,
            blocks: vec![block(64, 2), block(128, 2), block(256, 3), block(512, 3), block(512, 3)],
            fc_widths: vec![4096, 4096, num_classes],
            num_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [h, w] = self.input_size;
        if h == 0 || w == 0 {
            return Err(Error::param("input_size", "must be positive"));
        }
        if self.input_channels != 1 {
            return Err(Error::param("input_channels", "only single-channel input is supported"));
        }
        if self.num_classes < 2 {
            return Err(Error::param("num_classes", "need at least two classes"));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.conv_kernel != 3 || b.conv_stride != 1 || b.pool != 2 {
                return Err(Error::param(
                    format!("blocks[{i}]"),
                    "only 3x3 stride-1 convolutions with 2x2 pooling are supported",
                ));
            }
            if b.conv_filters == 0 || b.convs == 0 {
                return Err(Error::param(format!("blocks[{i}]"), "conv_filters and convs must be positive"));
            }
        }
        let (fh, fw) = self.feature_size();
        if fh == 0 || fw == 0 {
            return Err(Error::param(
                "blocks",
                format!("{} pooling stages reduce {h}x{w} input below 1x1", self.blocks.len()),
            ));
        }
        match self.fc_widths.last() {
            Some(&last) if last == self.num_classes => {}
            _ => return Err(Error::param("fc_widths", "last width must equal num_classes")),
        }
        if self.fc_widths.contains(&0) {
            return Err(Error::param("fc_widths", "widths must be positive"));
        }
        Ok(())
    }

    /// Spatial size after all pooling stages.
    pub fn feature_size(&self) -> (usize, usize) {
        let [mut h, mut w] = self.input_size;
        for _ in &self.blocks {
            h /= 2;
            w /= 2;
        }
        (h, w)
    }

    /// Layer sequence; parameter tensors are numbered in declaration order
    /// (weight, then bias, per conv/dense layer).
    pub fn layers(&self) -> Vec<Layer> {
        let [mut h, mut w] = self.input_size;
        let mut c = self.input_channels;
        let mut layers = Vec::new();
        let mut param = 0;
        for block in &self.blocks {
            for _ in 0..block.convs {
                layers.push(Layer::Conv { cin: c, cout: block.conv_filters, h, w, weight: param });
                param += 2;
                c = block.conv_filters;
                layers.push(Layer::Relu { len: c * h * w });
            }
            layers.push(Layer::Pool { c, h, w });
            h /= 2;
            w /= 2;
        }
        let mut inp = c * h * w;
        for (i, &out) in self.fc_widths.iter().enumerate() {
            layers.push(Layer::Dense { inp, out, weight: param });
            param += 2;
            if i + 1 < self.fc_widths.len() {
                layers.push(Layer::Relu { len: out });
            }
            inp = out;
        }
        layers
    }

    /// Shapes of every parameter tensor plus its fan-in (0 for biases).
    pub fn param_shapes(&self) -> Vec<(Vec<usize>, usize)> {
        let mut shapes = Vec::new();
        for layer in self.layers() {
            match layer {
                Layer::Conv { cin, cout, .. } => {
                    shapes.push((vec![cout, cin, 3, 3], cin * 9));
                    shapes.push((vec![cout], 0));
                }
                Layer::Dense { inp, out, .. } => {
                    shapes.push((vec![out, inp], inp));
                    shapes.push((vec![out], 0));
                }
                _ => {}
            }
        }
        shapes
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes().iter().map(|(s, _)| s.iter().product::<usize>()).sum()
    }
}

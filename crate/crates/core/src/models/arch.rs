//! Architecture constants, kept in one place so the reconstruction can be revised.

/// Per-sample classifier input: (height = I/Q rows, width = time samples, channels).
pub const FRAME_SHAPE: [usize; 3] = [2, 128, 1];
pub const NUM_CLASSES: usize = 11;

pub const VTCNN2_CONV1_FILTERS: usize = 256;
pub const VTCNN2_CONV1_KERNEL: (usize, usize) = (1, 3);
pub const VTCNN2_CONV2_FILTERS: usize = 80;
pub const VTCNN2_CONV2_KERNEL: (usize, usize) = (2, 3);
pub const VTCNN2_DENSE_UNITS: usize = 256;
pub const VTCNN2_DROPOUT: f64 = 0.5;

/// Hidden widths of the substitute MLP (input 256, output 11).
pub const MLP_HIDDEN: [usize; 5] = [1024, 1024, 1024, 512, 128];

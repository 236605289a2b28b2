//! Quantum-cuts segmentation of 3D grayscale volumes of porous media.
//!
//! The pipeline oversegments a volume into supervoxels at several scales,
//! builds a fully connected intensity graph per scale, seeds dark pore
//! supervoxels with a large potential and takes the ground state of the
//! resulting Hamiltonian as a solid-saliency map. Each scale is split into
//! two classes by 1D k-means and the scales are combined by majority vote.
//!
//! ```no_run
//! use qcuts3d::{phantom, segmentation, metrics, volume};
//!
//! let p = phantom::generate(&phantom::PhantomSpec::two_phase(64, 150, 1))?;
//! let seg = segmentation::segment_volume(&p.volume, &Default::default())?;
//! let truth = volume::binarize_ground_truth(&p.labels, phantom::Phase::Solid.code())?;
//! let report = metrics::evaluate(&seg.mask, &seg.field, &truth, 256)?;
//! println!("IoU {:.3}", report.iou);
//! # Ok::<(), qcuts3d::Error>(())
//! ```

pub mod eigen;
pub mod error;
pub mod gft;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod qcuts;
pub mod segmentation;
pub mod supervoxel;
pub mod volume;

pub use error::{Error, Result};
pub use graph::{Axis, KernelVariant, SupervoxelGraph};
pub use segmentation::{segment_volume, PipelineConfig, Segmentation};
pub use supervoxel::SupervoxelMap;
pub use volume::{Dims, LabelVolume, SaliencyField, SegmentationMask, Volume};

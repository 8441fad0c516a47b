pub mod actions;
pub mod datasetgen;
pub mod gestures;
pub mod intentnet;
pub mod rng;
pub mod usersim;
pub mod world;

pub mod fd2d;

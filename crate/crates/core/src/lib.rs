pub mod chanest;
pub mod channel;
pub mod equalizer;
pub mod fft64;
pub mod frame;
pub mod golden;
pub mod numerics;
pub mod receiver;
pub mod sync;
pub mod txref;

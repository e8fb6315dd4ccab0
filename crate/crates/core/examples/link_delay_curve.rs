//! Prints the per-link delay against utilization for the queueing model and
//! its smoothed continuation.

use tomosplit::netsim::{link_delay, smoothed_link_delay, Link};

fn main() {
    let link = Link::new(0, 1, 100.0).with_service_weight(0.01).with_propagation(0.002);
    println!("{:>6} {:>12} {:>12}", "util", "queueing", "smoothed");
    for k in 0..=24 {
        let u = k as f64 * 0.05;
        let x = u * link.capacity;
        println!("{u:>6.2} {:>12.6} {:>12.6}", link_delay(x, &link), smoothed_link_delay(x, &link));
    }
}

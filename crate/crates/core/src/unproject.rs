//! Metric depth to labeled point clouds.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::camera::Intrinsics;
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::raster::{check_dims, is_valid_depth, DepthImage, InstanceMask};

/// Back-projects every valid depth pixel to a camera-frame point
/// `X = D(u,v) · K⁻¹ [u, v, 1]ᵀ`, in row-major scan order.
///
/// Invalid pixels (`≤ 0`, NaN, ±∞) are skipped rather than mapped to the origin.
pub fn unproject(depth: &DepthImage, k: &Intrinsics) -> Result<PointCloud> {
    check_dims("depth vs intrinsics", k.dims(), depth.dims())?;
    let mut cloud = PointCloud::with_provenance();
    for (j, row) in depth.rows().enumerate() {
        for (i, &d) in row.iter().enumerate() {
            if !is_valid_depth(d) {
                continue;
            }
            let (u, v) = Intrinsics::pixel_center(i, j);
            cloud.push(k.backproject(u, v, d as f64), Some([i as u32, j as u32]));
        }
    }
    Ok(cloud)
}

/// Clouds routed by instance label.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Partition {
    pub background: PointCloud,
    pub objects: BTreeMap<u16, PointCloud>,
}

/// Splits a provenance-carrying cloud by the label of each point's source pixel.
///
/// Every instance id present in the mask gets an entry, even if none of its pixels had valid depth.
pub fn partition(cloud: &PointCloud, mask: &InstanceMask) -> Result<Partition> {
    let pixels = cloud.pixels.as_ref().ok_or(Error::MissingProvenance)?;
    let (w, h) = mask.dims();
    let mut out = Partition {
        background: PointCloud::with_provenance(),
        objects: BTreeMap::new(),
    };
    for id in mask.instance_ids() {
        let mut c = PointCloud::with_provenance();
        c.labels = Some(Vec::new());
        out.objects.insert(id, c);
    }
    for (p, px) in cloud.points.iter().zip(pixels) {
        let (i, j) = (px[0] as usize, px[1] as usize);
        if i >= w || j >= h {
            return Err(Error::DimensionMismatch {
                what: "point provenance vs mask",
                expected: (w, h),
                found: (i + 1, j + 1),
            });
        }
        let label = mask.label(i, j);
        if label == 0 {
            out.background.push(*p, Some(*px));
        } else {
            let c = out.objects.get_mut(&label).expect("label listed by instance_ids");
            c.push(*p, Some(*px));
            c.labels.as_mut().expect("labels").push(label);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::project;
    use crate::raster::Raster;
    use alloc::vec;

    fn k() -> Intrinsics {
        Intrinsics::new(500.0, 500.0, 250.0, 250.0, 1000, 500).unwrap()
    }

    #[test]
    fn principal_pixel_maps_to_optical_axis() {
        // cx = cy = 2.5 is the center of pixel (2, 2).
        let k = Intrinsics::new(300.0, 310.0, 2.5, 2.5, 5, 5).unwrap();
        let mut d = Raster::filled(5, 5, 0.0f32);
        d.set(2, 2, 2.0);
        let c = unproject(&d, &k).unwrap();
        assert_eq!(c.points, vec![crate::geometry::Vec3::new(0.0, 0.0, 2.0)]);
        assert_eq!(c.pixels.unwrap(), vec![[2, 2]]);
    }

    #[test]
    fn matches_scalar_formula() {
        let k = k();
        let mut d = Raster::filled(1000, 500, f32::NAN);
        d.set(750, 250, 1.0);
        let c = unproject(&d, &k).unwrap();
        // Oracle: ((u - cx)/fx, (v - cy)/fy, 1) * depth at the pixel center.
        let (u, v) = (750.5, 250.5);
        let expect = [(u - 250.0) / 500.0, (v - 250.0) / 500.0, 1.0];
        assert_eq!(c.len(), 1);
        for a in 0..3 {
            assert!((c.points[0][a] - expect[a]).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_depth_is_skipped() {
        let d = Raster::from_fn(1000, 500, |i, _| match i % 4 {
            0 => 0.0,
            1 => -1.0,
            2 => f32::INFINITY,
            _ => f32::NAN,
        });
        assert!(unproject(&d, &k()).unwrap().is_empty());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let d = Raster::filled(10, 10, 1.0f32);
        assert!(matches!(unproject(&d, &k()), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn projection_round_trip_within_half_pixel() {
        let k = Intrinsics::new(52.5, 52.0, 31.5, 23.5, 64, 48).unwrap();
        let d = Raster::from_fn(64, 48, |i, j| 0.5 + 0.01 * i as f32 + 0.02 * j as f32);
        let c = unproject(&d, &k).unwrap();
        for (p, px) in c.points.iter().zip(c.pixels.as_ref().unwrap()) {
            let (u, v, z) = project(p, &k).unwrap();
            assert!((u - (px[0] as f64 + 0.5)).abs() < 1e-6);
            assert!((v - (px[1] as f64 + 0.5)).abs() < 1e-6);
            assert!((z - *d.get(px[0] as usize, px[1] as usize) as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn partition_uniform_background() {
        let k = Intrinsics::new(10.0, 10.0, 2.0, 2.0, 4, 4).unwrap();
        let d = Raster::filled(4, 4, 1.0f32);
        let c = unproject(&d, &k).unwrap();
        let m = InstanceMask::new(Raster::filled(4, 4, 0u16));
        let p = partition(&c, &m).unwrap();
        assert_eq!(p.background.len(), 16);
        assert!(p.objects.is_empty());
    }

    #[test]
    fn partition_checkerboard_counts() {
        let k = Intrinsics::new(10.0, 10.0, 3.0, 2.0, 7, 5).unwrap();
        let d = Raster::from_fn(7, 5, |i, j| if (i * 3 + j) % 5 == 0 { 0.0 } else { 1.5 });
        let m = InstanceMask::new(Raster::from_fn(7, 5, |i, j| ((i + j) % 2) as u16));
        let c = unproject(&d, &k).unwrap();
        let p = partition(&c, &m).unwrap();
        // Oracle: histogram of labels over valid-depth pixels.
        let mut hist = [0usize; 2];
        for j in 0..5 {
            for i in 0..7 {
                if is_valid_depth(*d.get(i, j)) {
                    hist[m.label(i, j) as usize] += 1;
                }
            }
        }
        assert_eq!(p.background.len(), hist[0]);
        assert_eq!(p.objects[&1].len(), hist[1]);
        assert_eq!(p.background.len() + p.objects[&1].len(), c.len());
    }

    #[test]
    fn partition_key_set_and_provenance_required() {
        let k = Intrinsics::new(10.0, 10.0, 1.5, 0.5, 3, 1).unwrap();
        let d = Raster::filled(3, 1, 1.0f32);
        let m = InstanceMask::new(Raster::from_vec(3, 1, vec![0, 1, 2]).unwrap());
        let c = unproject(&d, &k).unwrap();
        let p = partition(&c, &m).unwrap();
        assert_eq!(p.objects.keys().copied().collect::<Vec<_>>(), vec![1, 2]);
        let bare = PointCloud::from_points(c.points.clone());
        assert_eq!(partition(&bare, &m), Err(Error::MissingProvenance));
    }
}

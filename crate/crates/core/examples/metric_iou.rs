// Scores RoI heatmaps against a rasterised ground-truth box and shows the
// overlap to IoU conversion.

use roitrack::controller::Window;
use roitrack::metric::{heatmap_iou, overlap_to_iou, rasterize_gt};
use roitrack::synth::oracle_heatmap;
use roitrack::{BBox, RoiMatrix};

fn run_example() -> roitrack::Result<()> {
    let window = Window::new(64.0, 64.0, 64.0, 64.0);
    let gt_box = BBox::new(48.0, 50.0, 30.0, 26.0);
    let gt = rasterize_gt(&gt_box, &window)?;
    println!("ground truth covers {} of 784 cells", gt.count());

    let perfect = oracle_heatmap(&gt_box, &window);
    let shifted = oracle_heatmap(&BBox::new(54.0, 50.0, 30.0, 26.0), &window);
    // soft prediction: the right answer at 0.6 confidence plus a faint floor
    let soft = RoiMatrix::from_fn(|r, c| if gt.get(r, c) { 0.6 } else { 0.05 });
    for (name, pred) in [("perfect", &perfect), ("shifted 6px", &shifted), ("soft", &soft)] {
        println!("{name:<12} heatmap IoU {:.4}", heatmap_iou(&gt, pred));
    }

    for o in [0.5, 0.63, 0.698, 0.75] {
        println!("overlap {o:<5} -> IoU {:.4}", overlap_to_iou(o));
    }
    Ok(())
}

fn main() {
    run_example().expect("example runs");
}

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "choreo/quaternion.hpp"
#include "choreo/tensor.hpp"

namespace choreo::motion {

struct Joint {
    std::string name;
    int parent = -1;  // -1 for the root
    Vec3 offset;      // meters, in the parent frame
};

// Topologically sorted joint tree (parent index < child index, joints[0] is
// the single root). J = joints.size() - 1 rotating joints; the root carries
// its own rotation in MotionFrame.
struct Skeleton {
    std::vector<Joint> joints;

    void validate() const;
    int joint_count() const { return static_cast<int>(joints.size()) - 1; }  // J
    std::vector<int> end_effectors() const;  // joints with no children

    static std::shared_ptr<const Skeleton> desk_default();  // 8 rotating joints
};

// Root parameters per frame: ground-plane velocity (dx, dz) in meters/frame,
// absolute height y, and the root rotation. P_r = 7, P_j = 4 J.
struct MotionFrame {
    Vec3 root_velocity;  // x = dx, y = height, z = dz
    Quaternion root_rotation;
    std::vector<Quaternion> joint_rotations;  // size J
};

struct MotionClip {
    std::shared_ptr<const Skeleton> skeleton;
    double fps = 80.0;
    std::vector<MotionFrame> frames;

    int frame_count() const { return static_cast<int>(frames.size()); }
    int joint_count() const { return skeleton ? skeleton->joint_count() : 0; }
    int params_per_frame() const { return 7 + 4 * joint_count(); }
    double duration() const { return frames.empty() ? 0.0 : (frame_count() - 1) / fps; }

    void validate() const;  // invariants: unit quats, finite, constant J

    // row-major [N, P] matrix view used by the inpainter; layout per frame:
    // dx, height, dz, root qw qx qy qz, then J * (qw qx qy qz)
    nn::Tensor to_matrix() const;
    static MotionClip from_matrix(const nn::Tensor& m, std::shared_ptr<const Skeleton> skel,
                                  double fps, bool renormalize = true);

    // pose interpolation at time t (seconds), slerp between bracketing frames
    MotionFrame sample(double t) const;
};

// Accumulated root positions per frame; position[0] = (dx0, y0, dz0).
std::vector<Vec3> root_positions(const MotionClip& clip);

// N x (J+1) x 3 world keypoints; root velocity integrates cumulatively,
// children chain parent position + parent global rotation applied to offset.
std::vector<std::vector<Vec3>> forward_kinematics(const MotionClip& clip);

// Eq.-style losses on plain clips (the differentiable twins live in graph.cpp).
double joint_rotation_loss(const MotionClip& pred, const MotionClip& gt);
double root_point_loss(const MotionClip& pred, const MotionClip& gt);

// Rigid ground-plane transform (translation + yaw) applied to `next` so its
// first-frame root pose matches `prev`'s last-frame root pose.
MotionClip align_root_points(const MotionClip& prev, const MotionClip& next);

struct KinematicBeatOptions {
    double threshold_ratio = 0.6;  // of the max observed deceleration
    int min_separation = 0;        // 0 -> fps/10
};

// Frames of sudden end-effector deceleration, in increasing order.
std::vector<int> detect_kinematic_beats(const MotionClip& clip, KinematicBeatOptions opts = {});

// Piecewise-linear time warp pairing kinematic beat times (frames / fps) with
// musical beat times (seconds, clip-local), resampled at the clip fps. Root
// ground-plane displacement is preserved exactly at the resample points.
MotionClip align_beats(const MotionClip& clip, const std::vector<int>& kin_beats,
                       const std::vector<double>& music_beats);

// Crossfade blend across `window` frames centered at the junction; outside the
// window frames are copied verbatim.
MotionClip linear_blend(const MotionClip& prev, const MotionClip& next, int window);

MotionFrame rest_pose(const Skeleton& skel, double height = 0.9);

}  // namespace choreo::motion

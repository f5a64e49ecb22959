#include "choreo/motion.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace choreo::motion {

double geodesic_distance(const Quaternion& a, const Quaternion& b) {
    if (std::abs(a.norm() - 1.0) > 1e-6 || std::abs(b.norm() - 1.0) > 1e-6)
        throw ValidationError("geodesic_distance: non-unit quaternion");
    Quaternion rel = a * b.conj();
    double v = std::sqrt(rel.x * rel.x + rel.y * rel.y + rel.z * rel.z);
    return 2.0 * std::atan2(v, std::abs(rel.w));
}

double geodesic_distance(const std::array<std::array<double, 3>, 3>& ra,
                         const std::array<std::array<double, 3>, 3>& rb) {
    // rel = ra rb^T
    double m[3][3];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            m[i][j] = 0.0;
            for (int k = 0; k < 3; ++k) m[i][j] += ra[i][k] * rb[j][k];
        }
    double tr = m[0][0] + m[1][1] + m[2][2];
    double sx = m[2][1] - m[1][2], sy = m[0][2] - m[2][0], sz = m[1][0] - m[0][1];
    double s = 0.5 * std::sqrt(sx * sx + sy * sy + sz * sz);
    double c = 0.5 * (tr - 1.0);
    return std::atan2(s, c);
}

void Skeleton::validate() const {
    if (joints.empty()) throw ValidationError("skeleton: no joints");
    if (joints[0].parent != -1) throw ValidationError("skeleton: joints[0] must be the root");
    for (std::size_t i = 1; i < joints.size(); ++i) {
        if (joints[i].parent < 0 || joints[i].parent >= static_cast<int>(i))
            throw ValidationError("skeleton: joint '" + joints[i].name +
                                  "' parent must precede it");
    }
    for (const auto& j : joints)
        if (!std::isfinite(j.offset.x) || !std::isfinite(j.offset.y) || !std::isfinite(j.offset.z))
            throw ValidationError("skeleton: non-finite offset on '" + j.name + "'");
}

std::vector<int> Skeleton::end_effectors() const {
    std::set<int> parents;
    for (const auto& j : joints)
        if (j.parent >= 0) parents.insert(j.parent);
    std::vector<int> out;
    for (int i = 1; i < static_cast<int>(joints.size()); ++i)
        if (!parents.count(i)) out.push_back(i);
    return out;
}

std::shared_ptr<const Skeleton> Skeleton::desk_default() {
    auto s = std::make_shared<Skeleton>();
    s->joints = {
        {"root", -1, {0.0, 0.0, 0.0}},    {"spine", 0, {0.0, 0.25, 0.0}},
        {"head", 1, {0.0, 0.25, 0.0}},    {"l_arm", 1, {0.2, 0.2, 0.0}},
        {"l_hand", 3, {0.3, 0.0, 0.0}},   {"r_arm", 1, {-0.2, 0.2, 0.0}},
        {"r_hand", 5, {-0.3, 0.0, 0.0}},  {"l_leg", 0, {0.1, -0.45, 0.0}},
        {"r_leg", 0, {-0.1, -0.45, 0.0}},
    };
    s->validate();
    return s;
}

void MotionClip::validate() const {
    if (!skeleton) throw ValidationError("clip: missing skeleton");
    skeleton->validate();
    if (frames.empty()) throw ValidationError("clip: empty");
    if (fps <= 0.0) throw ValidationError("clip: fps must be positive");
    int j = joint_count();
    for (const auto& f : frames) {
        if (static_cast<int>(f.joint_rotations.size()) != j)
            throw ValidationError("clip: inconsistent joint count");
        if (!std::isfinite(f.root_velocity.x) || !std::isfinite(f.root_velocity.y) ||
            !std::isfinite(f.root_velocity.z))
            throw ValidationError("clip: non-finite root velocity");
        if (std::abs(f.root_rotation.norm() - 1.0) > 1e-6)
            throw ValidationError("clip: non-unit root rotation");
        for (const auto& q : f.joint_rotations)
            if (std::abs(q.norm() - 1.0) > 1e-6)
                throw ValidationError("clip: non-unit joint rotation");
    }
}

nn::Tensor MotionClip::to_matrix() const {
    int n = frame_count(), p = params_per_frame();
    nn::Tensor m({n, p});
    for (int i = 0; i < n; ++i) {
        const MotionFrame& f = frames[static_cast<std::size_t>(i)];
        double* row = m.values.data() + static_cast<std::size_t>(i) * p;
        row[0] = f.root_velocity.x;
        row[1] = f.root_velocity.y;
        row[2] = f.root_velocity.z;
        row[3] = f.root_rotation.w;
        row[4] = f.root_rotation.x;
        row[5] = f.root_rotation.y;
        row[6] = f.root_rotation.z;
        for (std::size_t j = 0; j < f.joint_rotations.size(); ++j) {
            const Quaternion& q = f.joint_rotations[j];
            row[7 + 4 * j] = q.w;
            row[8 + 4 * j] = q.x;
            row[9 + 4 * j] = q.y;
            row[10 + 4 * j] = q.z;
        }
    }
    return m;
}

MotionClip MotionClip::from_matrix(const nn::Tensor& m, std::shared_ptr<const Skeleton> skel,
                                   double fps, bool renormalize) {
    if (m.rank() != 2) throw DimensionError("from_matrix: expected rank-2, got " + m.shape_str());
    int jc = skel->joint_count();
    if (m.shape[1] != 7 + 4 * jc)
        throw DimensionError("from_matrix: " + std::to_string(m.shape[1]) + " params vs skeleton " +
                             std::to_string(7 + 4 * jc));
    MotionClip clip;
    clip.skeleton = std::move(skel);
    clip.fps = fps;
    clip.frames.resize(static_cast<std::size_t>(m.shape[0]));
    auto fix = [renormalize](Quaternion q) {
        return renormalize ? q.normalized().canonical() : q;
    };
    for (int i = 0; i < m.shape[0]; ++i) {
        const double* row = m.values.data() + static_cast<std::size_t>(i) * m.shape[1];
        MotionFrame& f = clip.frames[static_cast<std::size_t>(i)];
        f.root_velocity = {row[0], row[1], row[2]};
        f.root_rotation = fix({row[3], row[4], row[5], row[6]});
        f.joint_rotations.resize(static_cast<std::size_t>(jc));
        for (int j = 0; j < jc; ++j)
            f.joint_rotations[static_cast<std::size_t>(j)] =
                fix({row[7 + 4 * j], row[8 + 4 * j], row[9 + 4 * j], row[10 + 4 * j]});
    }
    return clip;
}

MotionFrame MotionClip::sample(double t) const {
    if (frames.empty()) throw ValidationError("sample: empty clip");
    double ft = std::clamp(t, 0.0, duration()) * fps;
    int i0 = std::min(static_cast<int>(ft), frame_count() - 1);
    int i1 = std::min(i0 + 1, frame_count() - 1);
    double u = ft - i0;
    const MotionFrame& a = frames[static_cast<std::size_t>(i0)];
    const MotionFrame& b = frames[static_cast<std::size_t>(i1)];
    MotionFrame out;
    out.root_velocity = a.root_velocity + (b.root_velocity - a.root_velocity) * u;
    out.root_rotation = slerp(a.root_rotation, b.root_rotation, u);
    out.joint_rotations.resize(a.joint_rotations.size());
    for (std::size_t j = 0; j < a.joint_rotations.size(); ++j)
        out.joint_rotations[j] = slerp(a.joint_rotations[j], b.joint_rotations[j], u);
    return out;
}

std::vector<Vec3> root_positions(const MotionClip& clip) {
    std::vector<Vec3> pos(clip.frames.size());
    double px = 0.0, pz = 0.0;
    for (std::size_t i = 0; i < clip.frames.size(); ++i) {
        const Vec3& v = clip.frames[i].root_velocity;
        px += v.x;
        pz += v.z;
        pos[i] = {px, v.y, pz};
    }
    return pos;
}

std::vector<std::vector<Vec3>> forward_kinematics(const MotionClip& clip) {
    const Skeleton& skel = *clip.skeleton;
    auto rpos = root_positions(clip);
    std::size_t nj = skel.joints.size();
    std::vector<std::vector<Vec3>> out(clip.frames.size(), std::vector<Vec3>(nj));
    std::vector<Quaternion> grot(nj);
    for (std::size_t i = 0; i < clip.frames.size(); ++i) {
        const MotionFrame& f = clip.frames[i];
        out[i][0] = rpos[i];
        grot[0] = f.root_rotation;
        for (std::size_t j = 1; j < nj; ++j) {
            int p = skel.joints[j].parent;
            out[i][j] = out[i][static_cast<std::size_t>(p)] +
                        grot[static_cast<std::size_t>(p)].rotate(skel.joints[j].offset);
            grot[j] = grot[static_cast<std::size_t>(p)] * f.joint_rotations[j - 1];
        }
    }
    return out;
}

double joint_rotation_loss(const MotionClip& pred, const MotionClip& gt) {
    if (pred.frame_count() != gt.frame_count() || pred.joint_count() != gt.joint_count())
        throw DimensionError("joint_rotation_loss: clip shapes differ");
    double total = 0.0;
    for (std::size_t i = 0; i < pred.frames.size(); ++i)
        for (std::size_t j = 0; j < pred.frames[i].joint_rotations.size(); ++j)
            total += geodesic_distance(pred.frames[i].joint_rotations[j],
                                       gt.frames[i].joint_rotations[j]);
    return total;
}

double root_point_loss(const MotionClip& pred, const MotionClip& gt) {
    if (pred.frame_count() != gt.frame_count())
        throw DimensionError("root_point_loss: clip lengths differ");
    double total = 0.0;
    for (std::size_t i = 0; i < pred.frames.size(); ++i) {
        const MotionFrame& a = pred.frames[i];
        const MotionFrame& b = gt.frames[i];
        total += std::abs(a.root_velocity.x - b.root_velocity.x) +
                 std::abs(a.root_velocity.y - b.root_velocity.y) +
                 std::abs(a.root_velocity.z - b.root_velocity.z) +
                 std::abs(a.root_rotation.w - b.root_rotation.w) +
                 std::abs(a.root_rotation.x - b.root_rotation.x) +
                 std::abs(a.root_rotation.y - b.root_rotation.y) +
                 std::abs(a.root_rotation.z - b.root_rotation.z);
    }
    return total;
}

MotionClip align_root_points(const MotionClip& prev, const MotionClip& next) {
    if (prev.frames.empty() || next.frames.empty())
        throw ValidationError("align_root_points: empty clip");
    Vec3 target = root_positions(prev).back();
    double yaw_e = prev.frames.back().root_rotation.yaw();
    double yaw_s = next.frames.front().root_rotation.yaw();
    Quaternion r = yaw_rotation(yaw_e - yaw_s);
    MotionClip out = next;
    for (auto& f : out.frames) {
        Vec3 v = r.rotate({f.root_velocity.x, 0.0, f.root_velocity.z});
        f.root_velocity.x = v.x;
        f.root_velocity.z = v.z;
        f.root_rotation = (r * f.root_rotation).normalized().canonical();
    }
    // position[0] == root_velocity[0] on the ground plane, so the translation
    // part of the rigid transform is a direct overwrite
    out.frames[0].root_velocity.x = target.x;
    out.frames[0].root_velocity.z = target.z;
    return out;
}

std::vector<int> detect_kinematic_beats(const MotionClip& clip, KinematicBeatOptions opts) {
    int n = clip.frame_count();
    if (n < 3) return {};
    auto kp = forward_kinematics(clip);
    auto limbs = clip.skeleton->end_effectors();
    std::vector<double> speed(static_cast<std::size_t>(n), 0.0);
    for (int i = 1; i < n; ++i) {
        double s = 0.0;
        for (int e : limbs)
            s += (kp[static_cast<std::size_t>(i)][static_cast<std::size_t>(e)] -
                  kp[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(e)])
                     .norm();
        speed[static_cast<std::size_t>(i)] = s;
    }
    speed[0] = speed[1];
    std::vector<double> decel(static_cast<std::size_t>(n), 0.0);
    double max_decel = 0.0;
    for (int i = 1; i < n; ++i) {
        decel[static_cast<std::size_t>(i)] =
            speed[static_cast<std::size_t>(i - 1)] - speed[static_cast<std::size_t>(i)];
        max_decel = std::max(max_decel, decel[static_cast<std::size_t>(i)]);
    }
    if (max_decel < 1e-12) return {};
    double thresh = opts.threshold_ratio * max_decel;
    int min_sep = opts.min_separation > 0
                      ? opts.min_separation
                      : std::max(1, static_cast<int>(std::lround(clip.fps / 10.0)));
    std::vector<int> beats;
    for (int i = 1; i < n; ++i) {
        double d = decel[static_cast<std::size_t>(i)];
        if (d <= thresh) continue;
        double left = i > 1 ? decel[static_cast<std::size_t>(i - 1)] : -1e300;
        double right = i + 1 < n ? decel[static_cast<std::size_t>(i + 1)] : -1e300;
        if (d < left || d < right) continue;
        if (!beats.empty() && i - beats.back() < min_sep) continue;
        beats.push_back(i);
    }
    return beats;
}

namespace {

// piecewise-linear map through (sx[i], sy[i]) with end-slope extrapolation
struct PiecewiseLinear {
    std::vector<double> sx, sy;

    double eval(double x) const {
        std::size_t k = sx.size();
        if (k == 1) return sy[0] + (x - sx[0]);  // unit slope shift
        if (x <= sx[0]) {
            double m = (sy[1] - sy[0]) / (sx[1] - sx[0]);
            return sy[0] + m * (x - sx[0]);
        }
        if (x >= sx[k - 1]) {
            double m = (sy[k - 1] - sy[k - 2]) / (sx[k - 1] - sx[k - 2]);
            return sy[k - 1] + m * (x - sx[k - 1]);
        }
        auto it = std::upper_bound(sx.begin(), sx.end(), x);
        std::size_t i = static_cast<std::size_t>(it - sx.begin());
        double u = (x - sx[i - 1]) / (sx[i] - sx[i - 1]);
        return sy[i - 1] + u * (sy[i] - sy[i - 1]);
    }

    PiecewiseLinear inverse() const { return {sy, sx}; }
};

}  // namespace

MotionClip align_beats(const MotionClip& clip, const std::vector<int>& kin_beats,
                       const std::vector<double>& music_beats) {
    std::size_t k = std::min(kin_beats.size(), music_beats.size());
    if (k == 0 || clip.frames.empty()) return clip;
    PiecewiseLinear warp;
    for (std::size_t i = 0; i < k; ++i) {
        warp.sx.push_back(kin_beats[i] / clip.fps);
        warp.sy.push_back(music_beats[i]);
    }
    for (std::size_t i = 1; i < k; ++i)
        if (warp.sx[i] <= warp.sx[i - 1] || warp.sy[i] <= warp.sy[i - 1])
            throw ValidationError("align_beats: non-monotonic time warp");
    double src_dur = clip.duration();
    double out_dur = warp.eval(src_dur);
    if (out_dur <= 0.0 || warp.eval(0.0) >= out_dur)
        throw ValidationError("align_beats: warp collapses the clip");
    PiecewiseLinear inv = warp.inverse();

    auto pos = root_positions(clip);
    auto pos_at = [&](double t) -> Vec3 {  // ground-plane displacement + height
        double ft = std::clamp(t, 0.0, src_dur) * clip.fps;
        int i0 = std::min(static_cast<int>(ft), clip.frame_count() - 1);
        int i1 = std::min(i0 + 1, clip.frame_count() - 1);
        double u = ft - i0;
        const Vec3& a = pos[static_cast<std::size_t>(i0)];
        const Vec3& b = pos[static_cast<std::size_t>(i1)];
        return a + (b - a) * u;
    };

    int n_out = static_cast<int>(std::floor(out_dur * clip.fps + 1e-9)) + 1;
    MotionClip out;
    out.skeleton = clip.skeleton;
    out.fps = clip.fps;
    out.frames.resize(static_cast<std::size_t>(n_out));
    Vec3 prev_p;
    for (int i = 0; i < n_out; ++i) {
        double t_src = inv.eval(i / clip.fps);
        MotionFrame f = clip.sample(std::clamp(t_src, 0.0, src_dur));
        Vec3 p = pos_at(t_src);
        // displacements re-derived from resampled positions: the ground path
        // is preserved exactly at the output sample points
        f.root_velocity = {i == 0 ? p.x : p.x - prev_p.x, p.y, i == 0 ? p.z : p.z - prev_p.z};
        prev_p = p;
        out.frames[static_cast<std::size_t>(i)] = f;
    }
    return out;
}

MotionClip linear_blend(const MotionClip& prev, const MotionClip& next, int window) {
    if (window < 0) throw ParameterError("linear_blend: negative window");
    int np = prev.frame_count(), nn_ = next.frame_count();
    if (window > std::min(np, nn_))
        throw ParameterError("linear_blend: window " + std::to_string(window) +
                             " exceeds clip lengths");
    if (prev.joint_count() != next.joint_count())
        throw DimensionError("linear_blend: joint counts differ");
    MotionClip out;
    out.skeleton = prev.skeleton;
    out.fps = prev.fps;
    out.frames.resize(static_cast<std::size_t>(np + nn_));
    int first = np - window / 2;
    for (int i = 0; i < np + nn_; ++i) {
        if (i < first) {
            out.frames[static_cast<std::size_t>(i)] = prev.frames[static_cast<std::size_t>(i)];
        } else if (i >= first + window) {
            out.frames[static_cast<std::size_t>(i)] = next.frames[static_cast<std::size_t>(i - np)];
        } else {
            const MotionFrame& a = prev.frames[static_cast<std::size_t>(std::min(i, np - 1))];
            const MotionFrame& b = next.frames[static_cast<std::size_t>(std::max(0, i - np))];
            double u = (i - first + 0.5) / window;
            MotionFrame f;
            f.root_velocity = a.root_velocity + (b.root_velocity - a.root_velocity) * u;
            f.root_rotation = slerp(a.root_rotation, b.root_rotation, u);
            f.joint_rotations.resize(a.joint_rotations.size());
            for (std::size_t j = 0; j < a.joint_rotations.size(); ++j)
                f.joint_rotations[j] = slerp(a.joint_rotations[j], b.joint_rotations[j], u);
            out.frames[static_cast<std::size_t>(i)] = f;
        }
    }
    return out;
}

MotionFrame rest_pose(const Skeleton& skel, double height) {
    MotionFrame f;
    f.root_velocity = {0.0, height, 0.0};
    f.joint_rotations.assign(static_cast<std::size_t>(skel.joint_count()), Quaternion::identity());
    return f;
}

}  // namespace choreo::motion

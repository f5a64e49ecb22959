#include "choreo/motion_io.hpp"

#include <fstream>
#include <sstream>

#include "choreo/io.hpp"

namespace choreo::motion {

void save_clip(const MotionClip& clip, const std::filesystem::path& path) {
    if (!clip.skeleton) throw ValidationError("save_clip: missing skeleton");
    std::ostringstream out;
    out << "CHOREO-MOTION v1\n";
    out << "fps " << fmt_double(clip.fps) << "\n";
    out << "frames " << clip.frame_count() << "\n";
    out << "joints " << clip.joint_count() << "\n";
    for (const auto& j : clip.skeleton->joints)
        out << "joint " << j.name << " " << j.parent << " " << fmt_double(j.offset.x) << " "
            << fmt_double(j.offset.y) << " " << fmt_double(j.offset.z) << "\n";
    nn::Tensor m = clip.to_matrix();
    io::write_blob(out, m.values);
    io::write_file(path, out.str());
}

MotionClip load_clip(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open motion clip " + path.string());
    io::Header h = io::Header::parse(in, "CHOREO-MOTION");
    const io::Line* fps = h.find("fps");
    const io::Line* frames = h.find("frames");
    const io::Line* joints = h.find("joints");
    if (!fps || !frames || !joints) throw DataError("motion clip missing fps/frames/joints");
    auto skel = std::make_shared<Skeleton>();
    for (const io::Line* l : h.all("joint"))
        skel->joints.push_back(
            {l->str(1), static_cast<int>(l->integer(2)), {l->num(3), l->num(4), l->num(5)}});
    skel->validate();
    int jc = static_cast<int>(joints->integer(1));
    if (skel->joint_count() != jc)
        throw DataError("motion clip: joint lines disagree with joints field");
    int n = static_cast<int>(frames->integer(1));
    int p = 7 + 4 * jc;
    if (!h.has_blob() || h.blob_count() != static_cast<std::size_t>(n) * p)
        throw DataError("motion clip: blob size mismatch, expected " +
                        std::to_string(static_cast<std::size_t>(n) * p));
    nn::Tensor m({n, p}, io::read_blob(in, h.blob_count()));
    m.check_finite("motion clip " + path.string());
    MotionClip clip = MotionClip::from_matrix(m, std::move(skel), fps->num(1),
                                              /*renormalize=*/false);
    if (n > 0) clip.validate();
    return clip;
}

void export_keypoints(const MotionClip& clip, const std::filesystem::path& path) {
    auto kp = forward_kinematics(clip);
    std::ostringstream out;
    out << "CHOREO-KEYPOINTS v1\n";
    out << "frames " << clip.frame_count() << "\n";
    out << "points " << (clip.joint_count() + 1) << "\n";
    for (std::size_t i = 0; i < kp.size(); ++i) {
        out << "frame " << i;
        for (const Vec3& p : kp[i])
            out << " " << fmt_double(p.x) << " " << fmt_double(p.y) << " " << fmt_double(p.z);
        out << "\n";
    }
    io::write_file(path, out.str());
}

}  // namespace choreo::motion

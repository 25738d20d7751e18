#pragma once

#include "dentofuse/geometry.hpp"

namespace dfuse {

/// scale * rotation * p + translation, mapping IOS coordinates into the
/// CBCT frame. Rotation is a proper orthogonal matrix.
struct SimilarityTransform {
    double scale = 1.0;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }

    /// (a.then(b)) == b ∘ a is deliberately not provided; use compose.
    /// compose(a, b)(p) == a(b(p)).
    static SimilarityTransform compose(const SimilarityTransform& a,
                                       const SimilarityTransform& b) {
        SimilarityTransform r;
        r.scale = a.scale * b.scale;
        r.rotation = a.rotation * b.rotation;
        r.translation = a.scale * (a.rotation * b.translation) + a.translation;
        return r;
    }

    SimilarityTransform inverse() const {
        SimilarityTransform r;
        r.scale = 1.0 / scale;
        r.rotation = rotation.transpose();
        r.translation = -(r.scale * (r.rotation * translation));
        return r;
    }

    Mat4 matrix() const {
        Mat4 m = Mat4::Identity();
        m.block<3, 3>(0, 0) = scale * rotation;
        m.block<3, 1>(0, 3) = translation;
        return m;
    }

    /// Factors a 4x4 with uniform-scale upper block; throws if the block is
    /// not a positive similarity.
    static SimilarityTransform from_matrix(const Mat4& m);

    /// Rotation angle (radians) and translation distance between transforms,
    /// for registration error reporting.
    static double rotation_error_rad(const SimilarityTransform& a,
                                     const SimilarityTransform& b);
    static double translation_error(const SimilarityTransform& a,
                                    const SimilarityTransform& b);
};

}  // namespace dfuse

#include "dentofuse/transform.hpp"

#include <stdexcept>

namespace dfuse {

SimilarityTransform SimilarityTransform::from_matrix(const Mat4& m) {
    Mat3 a = m.block<3, 3>(0, 0);
    double s = std::cbrt(a.determinant());
    if (!(s > 0.0)) throw std::invalid_argument("matrix is not a positive similarity");
    Mat3 r = a / s;
    if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6)
        throw std::invalid_argument("matrix upper block is not scale*rotation");
    SimilarityTransform t;
    t.scale = s;
    t.rotation = r;
    t.translation = m.block<3, 1>(0, 3);
    return t;
}

double SimilarityTransform::rotation_error_rad(const SimilarityTransform& a,
                                               const SimilarityTransform& b) {
    Mat3 d = a.rotation.transpose() * b.rotation;
    double c = (d.trace() - 1.0) / 2.0;
    return std::acos(std::clamp(c, -1.0, 1.0));
}

double SimilarityTransform::translation_error(const SimilarityTransform& a,
                                              const SimilarityTransform& b) {
    return (a.translation - b.translation).norm();
}

}  // namespace dfuse

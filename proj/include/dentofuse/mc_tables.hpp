#pragma once

namespace dfuse {

// Corner numbering: v0=(0,0,0) v1=(1,0,0) v2=(1,1,0) v3=(0,1,0)
//                   v4=(0,0,1) v5=(1,0,1) v6=(1,1,1) v7=(0,1,1)
// Edge numbering:   e0=v0v1 e1=v1v2 e2=v2v3 e3=v3v0 e4=v4v5 e5=v5v6
//                   e6=v6v7 e7=v7v4 e8=v0v4 e9=v1v5 e10=v2v6 e11=v3v7
// Case bit i is set when corner i lies OUTSIDE the region; with that
// convention the listed triangles wind outward.
extern const int kMcEdgeTable[256];
extern const int kMcTriTable[256][16];

}  // namespace dfuse

#include "mlcontact/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <unordered_set>

namespace mlc {

double LayerStackSpec::total_thickness() const {
  double t = 0.0;
  for (const auto& l : layers) t += l.thickness;
  return t;
}

double LayerStackSpec::layer_z_top(int i) const {
  double z = z_top;
  for (int k = 0; k < i; ++k) z -= layers[k].thickness;
  return z;
}

void LayerStackSpec::validate() const {
  if (layers.empty()) throw std::invalid_argument("layer stack needs at least one layer");
  if (!(length_x() > 0.0) || !(length_y() > 0.0))
    throw std::invalid_argument("footprint extents must be positive");
  for (const auto& l : layers)
    if (!(l.thickness > 0.0)) throw std::invalid_argument("layer thickness must be positive");
}

double tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).cross(c - a).dot(d - a) / 6.0;
}

namespace {

int round_cells(double extent, double h) {
  long long n = std::llround(extent / h);
  return static_cast<int>(std::max<long long>(1, n));
}

// The 6 tetrahedra of the Kuhn subdivision of a cell, as (dx,dy,dz) corner
// offsets. All share the cell diagonal (0,0,0)-(1,1,1); every cell uses the
// same orientation, which keeps faces matched between neighbouring cells and
// across layer interfaces.
struct KuhnTet {
  std::array<std::array<int, 3>, 4> corners;
};

const std::array<KuhnTet, 6>& kuhn_tets() {
  static const std::array<KuhnTet, 6> tets = [] {
    std::array<KuhnTet, 6> out{};
    const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                             {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (int p = 0; p < 6; ++p) {
      std::array<int, 3> v{0, 0, 0};
      out[p].corners[0] = v;
      // Walk the axes in reverse permutation order: the first vertex after
      // the origin is the corner along the axis that is "largest" inside
      // the simplex { x_{p0} <= x_{p1} <= x_{p2} }.
      for (int k = 2; k >= 0; --k) {
        v[perms[p][k]] = 1;
        out[p].corners[3 - k] = v;
      }
    }
    return out;
  }();
  return tets;
}

void append_cell_tets(LayerMesh& lm, int ix, int iy, int iz) {
  for (const auto& kt : kuhn_tets()) {
    std::array<int, 4> ids;
    for (int v = 0; v < 4; ++v)
      ids[v] = lm.node_id(ix + kt.corners[v][0], iy + kt.corners[v][1],
                          iz + kt.corners[v][2]);
    double vol = tet_volume(lm.nodes[ids[0]], lm.nodes[ids[1]],
                            lm.nodes[ids[2]], lm.nodes[ids[3]]);
    if (vol < 0.0) std::swap(ids[2], ids[3]);
    lm.tets.push_back(ids);
  }
}

// Boundary triangles of one cell face, split along the diagonal induced by
// the Kuhn subdivision. `c` maps (dx,dy,dz) in {0,1}^3 to a node id.
template <typename Corner>
void emit_face(LayerMesh& lm, FacetTag tag, Corner&& c, int face) {
  auto push = [&](std::array<int, 3> a, std::array<int, 3> b, std::array<int, 3> d) {
    lm.boundary.push_back({{c(a), c(b), c(d)}, tag});
  };
  switch (face) {
    case 0:  // x = 0, diagonal (0,0)-(1,1) in (y,z)
      push({0, 0, 0}, {0, 1, 0}, {0, 1, 1});
      push({0, 0, 0}, {0, 0, 1}, {0, 1, 1});
      break;
    case 1:  // x = 1
      push({1, 0, 0}, {1, 1, 0}, {1, 1, 1});
      push({1, 0, 0}, {1, 0, 1}, {1, 1, 1});
      break;
    case 2:  // y = 0, diagonal (0,0)-(1,1) in (x,z)
      push({0, 0, 0}, {1, 0, 0}, {1, 0, 1});
      push({0, 0, 0}, {0, 0, 1}, {1, 0, 1});
      break;
    case 3:  // y = 1
      push({0, 1, 0}, {1, 1, 0}, {1, 1, 1});
      push({0, 1, 0}, {0, 1, 1}, {1, 1, 1});
      break;
    case 4:  // z = 0, diagonal (0,0)-(1,1) in (x,y)
      push({0, 0, 0}, {1, 0, 0}, {1, 1, 0});
      push({0, 0, 0}, {0, 1, 0}, {1, 1, 0});
      break;
    case 5:  // z = 1
      push({0, 0, 1}, {1, 0, 1}, {1, 1, 1});
      push({0, 0, 1}, {0, 1, 1}, {1, 1, 1});
      break;
    default:
      break;
  }
}

}  // namespace

GridCounts grid_counts(const LayerStackSpec& spec, double h) {
  spec.validate();
  if (!(h > 0.0)) throw std::invalid_argument("mesh size h must be positive");
  GridCounts gc;
  gc.nx = round_cells(spec.length_x(), h);
  gc.ny = round_cells(spec.length_y(), h);
  for (const auto& l : spec.layers) gc.nz.push_back(round_cells(l.thickness, h));
  for (int nz : gc.nz) {
    gc.hexes += static_cast<long long>(gc.nx) * gc.ny * nz;
    gc.nodes += static_cast<long long>(gc.nx + 1) * (gc.ny + 1) * (nz + 1);
  }
  gc.tets = 6 * gc.hexes;
  return gc;
}

TetMesh build_layer_stack(const LayerStackSpec& spec, double h) {
  GridCounts gc = grid_counts(spec, h);
  TetMesh mesh;
  mesh.spec = spec;
  mesh.h = h;
  const int n = spec.num_layers();
  mesh.layers.resize(n);
  mesh.node_offset.resize(n + 1, 0);

  for (int li = 0; li < n; ++li) {
    LayerMesh& lm = mesh.layers[li];
    lm.nx = gc.nx;
    lm.ny = gc.ny;
    lm.nz = gc.nz[li];
    lm.z_hi = spec.layer_z_top(li);
    lm.z_lo = spec.layer_z_bottom(li);
    lm.hx = spec.length_x() / lm.nx;
    lm.hy = spec.length_y() / lm.ny;
    lm.hz = spec.layers[li].thickness / lm.nz;

    lm.nodes.reserve(static_cast<std::size_t>(lm.nx + 1) * (lm.ny + 1) * (lm.nz + 1));
    for (int iz = 0; iz <= lm.nz; ++iz)
      for (int iy = 0; iy <= lm.ny; ++iy)
        for (int ix = 0; ix <= lm.nx; ++ix)
          lm.nodes.emplace_back(spec.x_min + ix * lm.hx, spec.y_min + iy * lm.hy,
                                lm.z_lo + iz * lm.hz);

    lm.tets.reserve(static_cast<std::size_t>(lm.nx) * lm.ny * lm.nz * 6);
    for (int iz = 0; iz < lm.nz; ++iz)
      for (int iy = 0; iy < lm.ny; ++iy)
        for (int ix = 0; ix < lm.nx; ++ix)
          append_cell_tets(lm, ix, iy, iz);

    // Boundary facets with tags. Sides are clamped for every layer, the top
    // of layer 1 carries the traction, the bottom of the last layer is
    // clamped, interface faces are contact faces.
    const FacetTag top_tag = (li == 0) ? FacetTag::TractionTop : FacetTag::ContactTop;
    const FacetTag bottom_tag = (li == n - 1) ? FacetTag::Dirichlet : FacetTag::ContactBottom;
    auto corner = [&](int ix, int iy, int iz) {
      return [&lm, ix, iy, iz](std::array<int, 3> d) {
        return lm.node_id(ix + d[0], iy + d[1], iz + d[2]);
      };
    };
    for (int iz = 0; iz < lm.nz; ++iz)
      for (int iy = 0; iy < lm.ny; ++iy) {
        emit_face(lm, FacetTag::Dirichlet, corner(0, iy, iz), 0);
        emit_face(lm, FacetTag::Dirichlet, corner(lm.nx - 1, iy, iz), 1);
      }
    for (int iz = 0; iz < lm.nz; ++iz)
      for (int ix = 0; ix < lm.nx; ++ix) {
        emit_face(lm, FacetTag::Dirichlet, corner(ix, 0, iz), 2);
        emit_face(lm, FacetTag::Dirichlet, corner(ix, lm.ny - 1, iz), 3);
      }
    for (int iy = 0; iy < lm.ny; ++iy)
      for (int ix = 0; ix < lm.nx; ++ix) {
        emit_face(lm, bottom_tag, corner(ix, iy, 0), 4);
        emit_face(lm, top_tag, corner(ix, iy, lm.nz - 1), 5);
      }

    lm.node_dirichlet.assign(lm.nodes.size(), 0);
    for (const auto& tri : lm.boundary)
      if (tri.tag == FacetTag::Dirichlet)
        for (int v : tri.nodes) lm.node_dirichlet[v] = 1;

    mesh.node_offset[li + 1] = mesh.node_offset[li] + lm.node_count();
  }
  return mesh;
}

int TetMesh::total_nodes() const { return node_offset.back(); }

int TetMesh::total_tets() const {
  int t = 0;
  for (const auto& lm : layers) t += static_cast<int>(lm.tets.size());
  return t;
}

ContactPairing extract_contact_pairing(const TetMesh& mesh, int interface) {
  const int n = mesh.num_layers();
  if (interface < 1 || interface > n - 1)
    throw std::out_of_range("contact interface index out of range");
  const LayerMesh& up = mesh.layers[interface - 1];
  const LayerMesh& lo = mesh.layers[interface];

  ContactPairing pairing;
  pairing.interface = interface;
  pairing.layer_above = interface - 1;
  pairing.layer_below = interface;
  pairing.plane_z = up.z_lo;

  const double tol = 1e-12 * std::hypot(mesh.spec.length_x(), mesh.spec.length_y());

  // Collect face nodes lexicographically by (x, y). Both sides are
  // structured grids over the same footprint, so equal (nx, ny) counts plus
  // coordinate coincidence make the pairing a bijection.
  if (up.nx != lo.nx || up.ny != lo.ny)
    throw std::runtime_error("interface grids do not match (non-matched meshes unsupported)");

  for (int iy = 0; iy <= up.ny; ++iy)
    for (int ix = 0; ix <= up.nx; ++ix) {
      const int a = up.node_id(ix, iy, 0);
      const int b = lo.node_id(ix, iy, lo.nz);
      const Vec3& pa = up.nodes[a];
      const Vec3& pb = lo.nodes[b];
      if ((pa - pb).norm() > tol)
        throw std::runtime_error("paired contact nodes do not coincide");
      pairing.node_pairs.emplace_back(a, b);
      pairing.pair_free.push_back(!up.node_dirichlet[a] && !lo.node_dirichlet[b] ? 1 : 0);
    }

  // Facet pairs: both sides split each grid square along the same diagonal,
  // so the two triangles per square are vertex-matched by construction.
  for (int iy = 0; iy < up.ny; ++iy)
    for (int ix = 0; ix < up.nx; ++ix) {
      auto au = [&](int dx, int dy) { return up.node_id(ix + dx, iy + dy, 0); };
      auto bl = [&](int dx, int dy) { return lo.node_id(ix + dx, iy + dy, lo.nz); };
      const double area = 0.5 * up.hx * up.hy;
      pairing.tri_pairs.push_back(
          {{au(0, 0), au(1, 0), au(1, 1)}, {bl(0, 0), bl(1, 0), bl(1, 1)}, area});
      pairing.tri_pairs.push_back(
          {{au(0, 0), au(0, 1), au(1, 1)}, {bl(0, 0), bl(0, 1), bl(1, 1)}, area});
    }
  return pairing;
}

std::vector<ContactPairing> extract_all_pairings(const TetMesh& mesh) {
  std::vector<ContactPairing> out;
  for (int i = 1; i < mesh.num_layers(); ++i)
    out.push_back(extract_contact_pairing(mesh, i));
  return out;
}

namespace {

double tri_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

}  // namespace

MeshDiagnostics validate_mesh(const TetMesh& mesh) {
  MeshDiagnostics diag;
  diag.pass = true;
  diag.tags_cover_boundary = true;
  diag.min_tet_volume = std::numeric_limits<double>::infinity();
  diag.max_tet_volume = 0.0;

  for (int li = 0; li < mesh.num_layers(); ++li) {
    const LayerMesh& lm = mesh.layers[li];
    double vol = 0.0;
    for (const auto& t : lm.tets) {
      const double v = tet_volume(lm.nodes[t[0]], lm.nodes[t[1]], lm.nodes[t[2]], lm.nodes[t[3]]);
      diag.min_tet_volume = std::min(diag.min_tet_volume, v);
      diag.max_tet_volume = std::max(diag.max_tet_volume, v);
      vol += v;
    }
    const double box_vol =
        mesh.spec.length_x() * mesh.spec.length_y() * mesh.spec.layers[li].thickness;
    const double vol_defect = std::abs(vol - box_vol) / box_vol;
    diag.max_volume_defect = std::max(diag.max_volume_defect, vol_defect);
    if (vol_defect > 1e-10) {
      diag.pass = false;
      diag.messages.push_back("layer " + std::to_string(li + 1) + ": tet volumes do not sum to box volume");
    }

    // Tag coverage: per-tag areas must match the box faces they tile.
    const double lx = mesh.spec.length_x(), ly = mesh.spec.length_y();
    const double tz = mesh.spec.layers[li].thickness;
    double area_by_tag[4] = {0, 0, 0, 0};
    for (const auto& tri : lm.boundary)
      area_by_tag[static_cast<int>(tri.tag)] +=
          tri_area(lm.nodes[tri.nodes[0]], lm.nodes[tri.nodes[1]], lm.nodes[tri.nodes[2]]);
    const bool first = (li == 0), last = (li == mesh.num_layers() - 1);
    const double want_dirichlet = 2 * (lx + ly) * tz + (last ? lx * ly : 0.0);
    const double want_traction = first ? lx * ly : 0.0;
    const double want_ctop = first ? 0.0 : lx * ly;
    const double want_cbot = last ? 0.0 : lx * ly;
    const double surf = 2 * (lx * ly + lx * tz + ly * tz);
    auto defect = [&](double got, double want) {
      return std::abs(got - want) / surf;
    };
    const double tag_defect =
        std::max({defect(area_by_tag[0], want_dirichlet), defect(area_by_tag[1], want_traction),
                  defect(area_by_tag[2], want_ctop), defect(area_by_tag[3], want_cbot)});
    diag.max_area_defect = std::max(diag.max_area_defect, tag_defect);
    if (tag_defect > 1e-10) {
      diag.pass = false;
      diag.tags_cover_boundary = false;
      diag.messages.push_back("layer " + std::to_string(li + 1) + ": boundary tag areas do not cover the box surface");
    }

    // Duplicate nodes within a layer.
    std::map<std::array<long long, 3>, int> seen;
    const double scale = 1.0 / (1e-12 * std::max({lx, ly, tz}));
    for (const auto& p : lm.nodes) {
      std::array<long long, 3> key = {std::llround(p.x() * scale), std::llround(p.y() * scale),
                                      std::llround(p.z() * scale)};
      if (!seen.emplace(key, 1).second) {
        diag.duplicate_nodes = true;
        diag.pass = false;
        diag.messages.push_back("layer " + std::to_string(li + 1) + ": duplicate node");
        break;
      }
    }
  }

  if (diag.min_tet_volume <= 0.0) {
    diag.pass = false;
    diag.messages.push_back("non-positive tetrahedron volume");
  }
  return diag;
}

}  // namespace mlc

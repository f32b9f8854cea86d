#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace mlc {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

/// One elastic layer of the stack, listed top to bottom.
struct LayerSpec {
  double thickness = 0.0;
  int material = 0;
};

/// Stacked-box geometry: a shared rectangular footprint and an ordered list
/// of layers. Layer 1 is topmost; layer i occupies
/// z in (z_top - sum_{k<=i} t_k, z_top - sum_{k<i} t_k).
struct LayerStackSpec {
  double x_min = 0.0, x_max = 1.0;
  double y_min = 0.0, y_max = 1.0;
  double z_top = 1.0;
  std::vector<LayerSpec> layers;

  int num_layers() const { return static_cast<int>(layers.size()); }
  double length_x() const { return x_max - x_min; }
  double length_y() const { return y_max - y_min; }
  double footprint_area() const { return length_x() * length_y(); }
  double total_thickness() const;
  /// z of the top face of layer `i` (0-based).
  double layer_z_top(int i) const;
  double layer_z_bottom(int i) const { return layer_z_top(i) - layers[i].thickness; }
  void validate() const;  // throws std::invalid_argument
};

/// Boundary facet classification. Side faces and the bottom of the last
/// layer are clamped; the top of layer 1 carries the surface traction;
/// interface faces are contact faces (bottom side of the upper layer is
/// ContactBottom, top side of the lower layer is ContactTop).
enum class FacetTag : std::uint8_t {
  Dirichlet = 0,
  TractionTop = 1,
  ContactTop = 2,
  ContactBottom = 3,
};

struct BoundaryTri {
  std::array<int, 3> nodes;  // layer-local node ids
  FacetTag tag;
};

/// Structured tetrahedral mesh of one layer: an nx*ny*nz grid of hexahedra,
/// each split into 6 tetrahedra with a fixed main-diagonal rule so the
/// subdivision is conforming across cells and across layer interfaces.
struct LayerMesh {
  int nx = 0, ny = 0, nz = 0;
  double hx = 0.0, hy = 0.0, hz = 0.0;  // effective spacings
  double z_lo = 0.0, z_hi = 0.0;
  std::vector<Vec3> nodes;
  std::vector<std::array<int, 4>> tets;  // positively oriented
  std::vector<BoundaryTri> boundary;
  std::vector<std::uint8_t> node_dirichlet;  // 1 if the node is clamped

  int node_count() const { return static_cast<int>(nodes.size()); }
  int node_id(int ix, int iy, int iz) const {
    return (iz * (ny + 1) + iy) * (nx + 1) + ix;
  }
};

struct TetMesh {
  LayerStackSpec spec;
  double h = 0.0;  // requested spacing
  std::vector<LayerMesh> layers;
  std::vector<int> node_offset;  // per layer; global id = offset + local id

  int num_layers() const { return static_cast<int>(layers.size()); }
  int total_nodes() const;
  int total_tets() const;
  int global_node(int layer, int local) const { return node_offset[layer] + local; }
};

/// Predicted structured-grid sizes for a (spec, h) pair, without building.
struct GridCounts {
  int nx = 0, ny = 0;
  std::vector<int> nz;  // per layer
  long long hexes = 0;
  long long tets = 0;
  long long nodes = 0;
};

GridCounts grid_counts(const LayerStackSpec& spec, double h);

TetMesh build_layer_stack(const LayerStackSpec& spec, double h);

/// Matched node and facet pairing across the interface between layer
/// `interface` (above, 1-based) and layer `interface`+1 (below).
struct ContactPairing {
  int interface = 0;  // 1-based, in [1, n-1]
  int layer_above = 0, layer_below = 0;  // 0-based layer indices
  double plane_z = 0.0;
  Vec3 normal_above{0, 0, -1};  // beta^i, outward from the upper layer
  Vec3 normal_below{0, 0, 1};   // alpha^{i+1}, outward from the lower layer

  // Node pairs, lexicographically ordered by (x, y). `first` is the
  // layer-local id on the upper layer's bottom face, `second` on the lower
  // layer's top face.
  std::vector<std::pair<int, int>> node_pairs;
  // 1 if both paired nodes carry displacement unknowns (i.e. the pair is
  // not on the clamped footprint boundary).
  std::vector<std::uint8_t> pair_free;

  struct TriPair {
    std::array<int, 3> above;  // local ids in the upper layer, vertex-matched
    std::array<int, 3> below;  // local ids in the lower layer
    double area = 0.0;
  };
  std::vector<TriPair> tri_pairs;  // ordered by centroid (x, y)

  int pair_count() const { return static_cast<int>(node_pairs.size()); }
  int tri_count() const { return static_cast<int>(tri_pairs.size()); }
};

ContactPairing extract_contact_pairing(const TetMesh& mesh, int interface);

std::vector<ContactPairing> extract_all_pairings(const TetMesh& mesh);

struct MeshDiagnostics {
  bool pass = false;
  double min_tet_volume = 0.0;
  double max_tet_volume = 0.0;
  double max_volume_defect = 0.0;    // relative, per layer vs box volume
  double max_area_defect = 0.0;      // relative, boundary tri area vs box surface
  bool tags_cover_boundary = false;
  bool duplicate_nodes = false;
  std::vector<std::string> messages;
};

MeshDiagnostics validate_mesh(const TetMesh& mesh);

double tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

}  // namespace mlc

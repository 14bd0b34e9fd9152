#include "h2mul/bench.hpp"
#include "h2mul/interpolation.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace h2mul;

namespace {

// numpy views of the mesh are copies; Vec3 lists are packed into n x 3 arrays
Matrix pack(const std::vector<Vec3>& points) {
    Matrix out(static_cast<Index>(points.size()), 3);
    for (std::size_t i = 0; i < points.size(); ++i) out.row(static_cast<Index>(i)) = points[i].transpose();
    return out;
}

std::shared_ptr<BlockTree> mutable_blocks(std::shared_ptr<const BlockTree> bt) {
    return std::const_pointer_cast<BlockTree>(std::move(bt));
}

}  // namespace

PYBIND11_MODULE(_h2mul, m) {
    m.doc() = "H2-matrix assembly, multiplication and recompression";

    py::class_<TriangleMesh>(m, "TriangleMesh")
        .def_property_readonly("size", &TriangleMesh::size)
        .def_property_readonly("vertices", [](const TriangleMesh& mesh) { return pack(mesh.vertices); })
        .def_property_readonly("midpoints", [](const TriangleMesh& mesh) { return pack(mesh.midpoints); })
        .def_property_readonly("areas", [](const TriangleMesh& mesh) {
            return Vector(Eigen::Map<const Vector>(mesh.areas.data(), static_cast<Index>(mesh.areas.size())));
        })
        .def_property_readonly("triangles", [](const TriangleMesh& mesh) {
            Eigen::Matrix<Index, Eigen::Dynamic, 3, Eigen::RowMajor> out(mesh.size(), 3);
            for (Index i = 0; i < mesh.size(); ++i)
                for (int k = 0; k < 3; ++k) out(i, k) = mesh.triangles[i][k];
            return out;
        })
        .def("__len__", &TriangleMesh::size);

    m.def("sphere_mesh", &build_sphere_mesh, py::arg("level"));
    m.def("latlong_sphere_mesh", &build_latlong_sphere_mesh, py::arg("segments"), py::arg("rings"));
    m.def("read_mesh", py::overload_cast<const std::string&>(&read_mesh), py::arg("path"));
    m.def("write_mesh", py::overload_cast<const std::string&, const TriangleMesh&>(&write_mesh), py::arg("path"),
          py::arg("mesh"));

    py::class_<ClusterTree, std::shared_ptr<ClusterTree>>(m, "ClusterTree")
        .def_property_readonly("size", &ClusterTree::size)
        .def_property_readonly("depth", [](const ClusterTree& t) { return t.depth; })
        .def_property_readonly("dimension", &ClusterTree::dimension)
        .def_property_readonly("leaf_size", [](const ClusterTree& t) { return t.leaf_size; })
        .def_property_readonly("index_at", [](const ClusterTree& t) { return t.index_at; })
        .def("to_tree_order", &ClusterTree::to_tree_order)
        .def("to_original_order", &ClusterTree::to_original_order);

    m.def(
        "build_cluster_tree",
        [](const TriangleMesh& mesh, Index leaf_size) {
            return std::make_shared<ClusterTree>(build_cluster_tree(mesh, leaf_size));
        },
        py::arg("mesh"), py::arg("leaf_size") = 16);

    py::class_<BlockTree, std::shared_ptr<BlockTree>>(m, "BlockTree")
        .def_property_readonly("size", &BlockTree::size)
        .def_property_readonly("eta", [](const BlockTree& b) { return b.eta; })
        .def_property_readonly("admissible", [](const BlockTree& b) { return b.count(BlockKind::admissible); })
        .def_property_readonly("inadmissible", [](const BlockTree& b) { return b.count(BlockKind::inadmissible); });

    m.def(
        "build_block_tree",
        [](std::shared_ptr<ClusterTree> rows, std::shared_ptr<ClusterTree> cols, double eta) {
            return mutable_blocks(build_block_tree(rows, cols, eta));
        },
        py::arg("rows"), py::arg("cols"), py::arg("eta") = 1.0);

    py::class_<H2Matrix>(m, "H2Matrix")
        .def_property_readonly("rows", &H2Matrix::rows)
        .def_property_readonly("cols", &H2Matrix::cols)
        .def_property_readonly("blocks", [](const H2Matrix& G) { return mutable_blocks(G.structure); })
        .def_property_readonly("max_row_rank", [](const H2Matrix& G) { return G.row_basis->max_rank(); })
        .def_property_readonly("max_col_rank", [](const H2Matrix& G) { return G.col_basis->max_rank(); })
        .def("memory_bytes", [](const H2Matrix& G) { return memory_footprint(G); })
        .def("matvec", &h2_matvec, py::arg("x"), "G x with x in cluster-tree order")
        .def("rmatvec", &h2_matvec_adjoint, py::arg("x"), "G^T x with x in cluster-tree order")
        .def(
            "to_dense", [](const H2Matrix& G, Index limit) { return to_dense(G, limit); },
            py::arg("limit") = default_dense_limit)
        .def(
            "save", [](const H2Matrix& G, const std::string& path) { save_h2(path, G); }, py::arg("path"));

    m.def(
        "load_h2", [](const std::string& path) { return load_h2(path); }, py::arg("path"));

    m.def("single_layer_kernel", [](const Vec3& x, const Vec3& y) { return single_layer_kernel(x, y); });

    m.def(
        "assemble_single_layer",
        [](const TriangleMesh& mesh, std::shared_ptr<BlockTree> blocks, int order) {
            return assemble_h2(mesh, blocks, single_layer_kernel, order);
        },
        py::arg("mesh"), py::arg("blocks"), py::arg("order") = 3);

    py::class_<TruncationControl>(m, "TruncationControl")
        .def(py::init([](double eps, double theta, int power_iterations, std::uint64_t seed) {
                 TruncationControl ctl;
                 ctl.target_eps = eps;
                 ctl.theta = theta;
                 ctl.power_iterations = power_iterations;
                 ctl.seed = seed;
                 ctl.validate();
                 return ctl;
             }),
             py::arg("eps") = 1e-4, py::arg("theta") = 0.25, py::arg("power_iterations") = 10,
             py::arg("seed") = 42)
        .def_readwrite("eps", &TruncationControl::target_eps)
        .def_readwrite("theta", &TruncationControl::theta)
        .def_readwrite("power_iterations", &TruncationControl::power_iterations)
        .def_readwrite("seed", &TruncationControl::seed);

    m.def(
        "multiply",
        [](const H2Matrix& X, const H2Matrix& Y, std::shared_ptr<BlockTree> target, const TruncationControl& ctl,
           int threads) {
            CoarsenOptions options;
            options.threads = threads;
            py::gil_scoped_release release;
            return multiply(X, Y, target, ctl, options);
        },
        py::arg("x"), py::arg("y"), py::arg("target"), py::arg("control") = TruncationControl{},
        py::arg("threads") = 1);

    py::class_<BenchConfig>(m, "BenchConfig")
        .def(py::init<>())
        .def_readwrite("levels", &BenchConfig::levels)
        .def_readwrite("leaf_size", &BenchConfig::leaf_size)
        .def_readwrite("order", &BenchConfig::order)
        .def_readwrite("eta", &BenchConfig::eta)
        .def_readwrite("eps", &BenchConfig::eps)
        .def_readwrite("theta", &BenchConfig::theta)
        .def_readwrite("power_steps", &BenchConfig::power_steps)
        .def_readwrite("seed", &BenchConfig::seed)
        .def_readwrite("threads", &BenchConfig::threads)
        .def_readwrite("dense_check", &BenchConfig::dense_check);

    m.def(
        "run_benchmark",
        [](const BenchConfig& config) {
            config.validate();
            std::vector<BenchRow> rows;
            {
                py::gil_scoped_release release;
                rows = run_benchmark(config, nullptr);
            }
            py::list out;
            for (const auto& r : rows) {
                py::dict d;
                d["n"] = r.n;
                d["row_s"] = r.row_s;
                d["col_s"] = r.col_s;
                d["mem_mb"] = r.mem_mb;
                d["rel_error"] = r.rel_error;
                d["max_row_rank"] = r.max_row_rank;
                d["max_col_rank"] = r.max_col_rank;
                if (r.dense_error >= 0.0) d["dense_error"] = r.dense_error;
                out.append(d);
            }
            return out;
        },
        py::arg("config"));
}

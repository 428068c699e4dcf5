// Benchmark: serial reference loop vs OpenMP replication fan-out on the
// variance-sweep workload, with a bitwise result comparison. Usage:
//   isgd_bench [reps] [niters]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "isgd/parallel.hpp"
#include "isgd/rng.hpp"
#include "isgd/sgd_engine.hpp"
#include "isgd/simlab.hpp"

using namespace isgd;

namespace {

std::vector<Vector> run_all(int reps, int jobs, long niters, const NormalLinearSpec& spec) {
    const NaturalParamModel model = NaturalParamModel::normal_identity();
    std::vector<Vector> finals(static_cast<std::size_t>(reps));
    run_replications(reps, jobs, [&](int r) {
        Rng rng = Rng::substream(42, static_cast<std::uint64_t>(r));
        const Dataset data = gen_normal_linear(spec, niters, rng);
        SgdConfig config;
        config.method = Method::Implicit;
        config.rate = LearningRate::power_law(4.0);
        config.order = DataOrder::Stream;
        config.niters = niters;
        finals[static_cast<std::size_t>(r)] = fit(data, model, config).theta;
    });
    return finals;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

} // namespace

int main(int argc, char** argv) {
    const int reps = argc > 1 ? std::atoi(argv[1]) : 64;
    const long niters = argc > 2 ? std::atol(argv[2]) : 20000;
    const int p = 20;

    Rng meta = Rng::substream(42, 1000000007ULL);
    NormalLinearSpec spec;
    spec.eigenvalues = draw_diagonal_eigenvalues(p, 0.5, 5.0, meta);
    spec.theta_star = Vector::Ones(p);

    std::printf("replication benchmark: %d reps x %ld iterations (p=%d)\n", reps, niters, p);

    auto t0 = std::chrono::steady_clock::now();
    const auto serial = run_all(reps, 1, niters, spec);
    const double t_serial = seconds_since(t0);
    std::printf("  serial reference: %.3f s\n", t_serial);

    const int jobs = hardware_jobs();
    t0 = std::chrono::steady_clock::now();
    const auto parallel = run_all(reps, jobs, niters, spec);
    const double t_parallel = seconds_since(t0);
    std::printf("  openmp (%d jobs): %.3f s  (speedup %.2fx)\n", jobs, t_parallel,
                t_serial / t_parallel);

    for (std::size_t r = 0; r < serial.size(); ++r) {
        if (serial[r] != parallel[r]) {
            std::printf("MISMATCH at replication %zu: parallel result differs from serial\n", r);
            return 1;
        }
    }
    std::printf("  results identical across schedules\n");
    return 0;
}

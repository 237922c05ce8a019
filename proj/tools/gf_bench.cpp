// Kernel benchmark: serial reference vs OpenMP variants, with a bitwise
// equality check on every compared kernel.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "glyphforge/core/kernels.hpp"
#include "glyphforge/core/rng.hpp"

using namespace glyphforge;

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm up
    auto t0 = Clock::now();
    for (int i = 0; i < reps; i++) fn();
    auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

struct Row {
    std::string name;
    double serial_ms;
    double parallel_ms;
    bool bitwise_equal;
};

void print_row(const Row& r) {
    std::printf("%-28s %10.3f %10.3f %9.2fx   %s\n", r.name.c_str(), r.serial_ms, r.parallel_ms,
                r.serial_ms / r.parallel_ms, r.bitwise_equal ? "exact" : "MISMATCH");
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads = %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP not available; comparing identical serial paths\n");
#endif
    std::printf("%-28s %10s %10s %10s\n", "kernel", "serial ms", "omp ms", "speedup");

    GaussianRng rng(42);
    const int reps = 20;

    Tensor a = rng.normal(512, 512, 4);
    Tensor b = rng.normal(512, 512, 4);
    Tensor mask(512, 512, 1);
    for (size_t i = 0; i < mask.size(); i++) mask.v[i] = (i % 3 == 0) ? 1.0f : 0.0f;

    {
        Tensor r1 = kern::serial::fuse_noise(a, b, mask, 0.8f);
        Tensor r2 = kern::fuse_noise(a, b, mask, 0.8f);
        print_row({"fuse_noise 512x512x4",
                   time_ms([&] { kern::serial::fuse_noise(a, b, mask, 0.8f); }, reps),
                   time_ms([&] { kern::fuse_noise(a, b, mask, 0.8f); }, reps), r1 == r2});
    }
    {
        Tensor r1 = kern::serial::harmonize(a, b, 7.5f);
        Tensor r2 = kern::harmonize(a, b, 7.5f);
        print_row({"harmonize 512x512x4",
                   time_ms([&] { kern::serial::harmonize(a, b, 7.5f); }, reps),
                   time_ms([&] { kern::harmonize(a, b, 7.5f); }, reps), r1 == r2});
    }
    {
        Tensor r1 = kern::serial::ddim_step(a, b, 0.31, 0.52);
        Tensor r2 = kern::ddim_step(a, b, 0.31, 0.52);
        print_row({"ddim_step 512x512x4",
                   time_ms([&] { kern::serial::ddim_step(a, b, 0.31, 0.52); }, reps),
                   time_ms([&] { kern::ddim_step(a, b, 0.31, 0.52); }, reps), r1 == r2});
    }

    Tensor ma = rng.normal(384, 384);
    Tensor mb = rng.normal(384, 384);
    {
        Tensor r1 = kern::serial::matmul(ma, mb);
        Tensor r2 = kern::matmul(ma, mb);
        print_row({"matmul 384x384",
                   time_ms([&] { kern::serial::matmul(ma, mb); }, 3),
                   time_ms([&] { kern::matmul(ma, mb); }, 3), r1 == r2});
    }
    {
        Tensor scores = rng.normal(1024, 1024);
        Tensor r1 = kern::serial::softmax_rows(scores);
        Tensor r2 = kern::softmax_rows(scores);
        print_row({"softmax_rows 1024x1024",
                   time_ms([&] { kern::serial::softmax_rows(scores); }, 5),
                   time_ms([&] { kern::softmax_rows(scores); }, 5), r1 == r2});
    }

    Tensor img = rng.normal(512, 512);
    {
        Tensor r1 = kern::serial::gaussian_blur(img, 4.0f);
        Tensor r2 = kern::gaussian_blur(img, 4.0f);
        print_row({"gaussian_blur 512x512 s=4",
                   time_ms([&] { kern::serial::gaussian_blur(img, 4.0f); }, 3),
                   time_ms([&] { kern::gaussian_blur(img, 4.0f); }, 3), r1 == r2});
    }
    {
        Tensor r1 = kern::serial::bilinear_resize(img, 2048, 2048);
        Tensor r2 = kern::bilinear_resize(img, 2048, 2048);
        print_row({"bilinear_resize 512->2048",
                   time_ms([&] { kern::serial::bilinear_resize(img, 2048, 2048); }, 3),
                   time_ms([&] { kern::bilinear_resize(img, 2048, 2048); }, 3), r1 == r2});
    }
    {
        Tensor r1 = kern::serial::area_resample(img, 64, 64);
        Tensor r2 = kern::area_resample(img, 64, 64);
        print_row({"area_resample 512->64",
                   time_ms([&] { kern::serial::area_resample(img, 64, 64); }, 10),
                   time_ms([&] { kern::area_resample(img, 64, 64); }, 10), r1 == r2});
    }
    return 0;
}

#include <cassert>
#include <utility>
int main() {
    int a = 10;
    int &&rref = std::move(a);
    assert(rref == 10);
    rref = 5;
    assert(rref == 5);
    return 0;
}
// VERDICT: SUCCESSFUL

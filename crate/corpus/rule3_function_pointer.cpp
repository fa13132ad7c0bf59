int inc(int x) { return x + 1; }

int main() {
  try {
    throw inc;
  } catch (int (*fp)(char)) {
    assert(0);
  } catch (int (*fp)(int)) {
    assert(fp(1) == 2);
  }
  return 0;
}
// VERDICT: SUCCESSFUL

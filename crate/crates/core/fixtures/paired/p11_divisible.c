#include <stdio.h>
int main() {
    int n, i, c;
    scanf("%d", &n);
    c = 0;
    for (i = 1; i <= n; i++) {
        if (i % 3 == 0 || i % 5 == 0) {
            c = c + 1;
        }
    }
    printf("%d\n", c);
    return 0;
}
